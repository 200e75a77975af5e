"""Echo state network classification benchmarked against logistic regression."""
from .dataio import Dataset, SynthSpec, load_csv, save_csv, standardize, synth_generate
from .glm import LogisticFit, WaldRow, fit_logistic, predict_proba, wald_stats
from .metrics import ConfusionMatrix, CvReport, RocCurve, confusion, cross_validate, kfold_split, mse, roc
from .reservoir import EsnConfig, EsnModel, encode, init_esn, predict_esn, readout, train_lms, train_ridge
from .stepwise import SelectionTrace, backward_select

__version__ = "0.1.0"

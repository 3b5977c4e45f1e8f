"""Value of information for risk prediction model development.

Decision curves, expected value of perfect information (EVPI) and expected
value of sample information (EVSI) for future development sample sizes,
computed by a nested bootstrap over a development sample.
"""

from .data import ColumnSpec, DataError, Dataset, empirical_prevalence, load_csv
from .glm import Coefficients, FitError, FitOptions, fit_logistic, fit_weighted_logistic, predict_risk
from .netbenefit import ThresholdGrid, empirical_nb, nb_model, nb_perfect, nb_treat_all
from .resample import RngSpec, WeightVector
from .voi import VoiConfig, VoiError, VoiResult, run_voi, scale_to_population

__all__ = [
    "ColumnSpec", "DataError", "Dataset", "empirical_prevalence", "load_csv",
    "Coefficients", "FitError", "FitOptions", "fit_logistic", "fit_weighted_logistic",
    "predict_risk", "ThresholdGrid", "empirical_nb", "nb_model", "nb_perfect", "nb_treat_all",
    "RngSpec", "WeightVector", "VoiConfig", "VoiError", "VoiResult", "run_voi",
    "scale_to_population",
]

__version__ = "0.1.0"

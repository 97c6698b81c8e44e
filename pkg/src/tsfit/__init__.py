"""Partition-parallel estimation and forecasting for multivariate ARMA models."""

from .core import (ArmaModel, LaggedCovariance, PsiWeights, RegularSeries, difference, integrate,
                   is_causal, is_invertible, load_model, model_autocovariance, psi_weights,
                   save_model, simulate)
from .errors import (ContractViolation, DegeneracyError, DomainError, IngestionError,
                     NumericalFailure, SingularMomentMatrixError, StepSizeError, TsfitError)
from .fit_freq import (durbin_levinson, fit_ar_durbin_levinson, fit_ar_yule_walker, fit_arma,
                       fit_ma, innovations)
from .fit_mle import (BandedArModel, MleOptions, conditional_loglik, conditional_loglik_grad,
                      fit_ar_mle, fit_banded_ar)
from .forecast import forecast_ar, forecast_arma, forecast_arma_one_step
from .moments import autocorrelation, autocovariance, mean, pacf
from .overlap import Engine, WindowKernel, map_reduce, partition

__all__ = [
    "ArmaModel", "BandedArModel", "ContractViolation", "DegeneracyError", "DomainError", "Engine",
    "IngestionError", "LaggedCovariance", "MleOptions", "NumericalFailure", "PsiWeights",
    "RegularSeries", "SingularMomentMatrixError", "StepSizeError", "TsfitError", "WindowKernel",
    "autocorrelation", "autocovariance", "conditional_loglik", "conditional_loglik_grad",
    "difference", "durbin_levinson", "fit_ar_durbin_levinson", "fit_ar_mle", "fit_ar_yule_walker",
    "fit_arma", "fit_banded_ar", "fit_ma", "forecast_ar", "forecast_arma",
    "forecast_arma_one_step", "innovations", "integrate", "is_causal", "is_invertible",
    "load_model", "map_reduce", "mean", "model_autocovariance", "pacf", "partition",
    "psi_weights", "save_model", "simulate",
]

"""Quantile L-estimation under simple random and ranked set sampling."""
from .sampler import Design, RankingModel
from .distributions import Normal, Exponential, Weibull, parse_distribution

__version__ = "0.1.0"

__all__ = ["Design", "RankingModel", "Normal", "Exponential", "Weibull", "parse_distribution", "__version__"]

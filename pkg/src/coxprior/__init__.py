"""Bayesian Cox proportional-hazards analysis of two-arm survival data with
log-normal hazard-ratio priors."""

__version__ = "0.1.0"

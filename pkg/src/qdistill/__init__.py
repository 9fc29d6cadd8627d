"""qdistill: simulate, correlate and distill mixed quantum/classical EMCCD images."""
__version__ = "0.1.0"

"""Three-species prey-taxis reaction-diffusion toolkit."""

__version__ = "0.1.0"

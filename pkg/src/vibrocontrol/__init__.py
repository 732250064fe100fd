"""Two-photon vibrational population control in a soft-core diatomic model."""

__version__ = "0.1.0"

"""Mixed local/nonlocal Neumann problems: discretisation, spectra and critical points."""

__version__ = "0.1.0"

"""rawmap: raw-signal read mapping with an in-storage-processing cost model."""

__version__ = "0.1.0"

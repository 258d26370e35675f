"""ECG Bench - neural-network inference engine and cost model for ECG beat classification"""

__version__ = "1.0.0"

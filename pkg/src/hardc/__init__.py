"""HARDC ECG arrhythmia pipeline."""

__version__ = "0.1.0"

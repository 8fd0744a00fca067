"""Bridge between pretrained PPG models and the benchmark file formats.

Loads frozen encoders, converts PPGS segment stores into PPGE embedding
stores and zero-shot prediction CSVs, and converts PulseDB source files
into the manifest + PPGS layout.  Deliberately self-contained: it speaks
to the benchmark toolkit only through its on-disk formats.
"""

__version__ = "0.1.0"

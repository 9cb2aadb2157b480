"""Model bridge: serves pretrained models over newline-delimited JSON on stdio.

Echo mode (``SIDECAR_ECHO=1``) swaps every model for a deterministic stub so
protocol conformance is testable without weights.
"""

__version__ = "0.1.0"

"""t2meval: text-to-motion evaluation metrics and their agreement with
human judgments.

Subpackages cover the coordinate-error metrics (ce), embedding-space
metrics (embed), the learned transformer evaluator (mobert), and the
correlation/agreement statistics (stats), tied together by a CLI.
"""

__version__ = "0.1.0"

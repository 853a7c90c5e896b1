"""Hierarchical sequence labeling of résumé-like documents.

Line-level section and group labels and token-level entity labels are
predicted jointly by a token BiLSTM, a line BiLSTM over pooled token states
and a CRF per level.
"""

__version__ = "0.1.0"

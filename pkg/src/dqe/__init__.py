"""dqe: reference-less evaluation of data-to-text generation.

The engine scores a generated description directly against its structured
source (triple set or attribute-value table) by generating questions from
each side and answering them on the other, without needing gold references.
A text mode that compares against a reference instead is included as a
baseline.
"""

__version__ = "1.0.0"

"""dqe-server: train and serve the neural QG/QA/embedding backends.

Four text-to-text checkpoints (textual QG/QA trained on a SQuAD-format
corpus, multimodal QG/QA fine-tuned on synthetic training views) are
served behind the evaluation engine's HTTP wire protocol, together with
an embedding endpoint. Decoding is greedy and seeded, so responses are
byte-reproducible.
"""

__version__ = "1.0.0"

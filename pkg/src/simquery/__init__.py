"""Semantic query over minimal simplicial structures.

Builds coauthorship simplicial complexes from bipartite corpora, reduces them
via Hodge-Laplacian ranking, trains a masked simplicial convolutional
autoencoder, and simulates teacher/student query inference over a noisy
channel.
"""

__version__ = "0.1.0"

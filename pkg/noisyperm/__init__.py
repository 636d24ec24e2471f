# Finite-blocklength achievability bounds for noisy permutation channels
from noisyperm.bounds import Bec, BoundMethod, BoundPoint, Bsc, search_max_m
from noisyperm.packing import ChannelMatrix, MessageSet

__all__ = ["Bec", "BoundMethod", "BoundPoint", "Bsc", "ChannelMatrix", "MessageSet", "search_max_m"]

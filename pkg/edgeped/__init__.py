from edgeped.core.codec import encode_frame, decode_frame, encode_sequence
from edgeped.core.evaluation import run_sweep, find_threshold
from edgeped.core.link import simulate_stream

__version__ = "0.1.0"

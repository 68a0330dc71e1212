from .corpus import Sentence
from .corpus import Span
from .corpus import Triplet
from .corpus import DatasetSplit
from .corpus import parse_aste_line
from .corpus import serialize_sentence
from .corpus import load_file
from .corpus import load_split
from .corpus import dataset_stats
from .corpus import build_vocab
from .corpus import encode_tokens
from .config import ModelConfig
from .config import TrainConfig
from .config import resolve_config
from .encoder import encode
from .encoder import init_params
from .syntax_channel import bilstm_encode
from .syntax_channel import build_dep_adjacency
from .graph import gcn_forward
from .graph import semantic_adjacency
from .hfim import fuse
from .hfim import channel_kl
from .triplet_head import enumerate_spans
from .triplet_head import sample_negatives
from .triplet_head import decode_triplets
from .model import DessModel
from .model import predict_sentences
from .training import total_loss
from .training import train
from .training import evaluate_split
from .evaluation import exact_match
from .evaluation import categorize_errors
from .checkpoint import save_checkpoint
from .checkpoint import load_checkpoint
from .export import export_attention
from .fetch import fetch_dataset
from .synthetic import synthetic_corpus
from .errors import DessError

__version__ = "0.1.0"

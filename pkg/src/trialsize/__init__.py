"""Sample-size extraction from randomised controlled trial abstracts.

Rule-based integer candidates, three feature families, an RBF-kernel SVM
trained with SMO and calibrated with a Platt sigmoid, and one-size-per-
abstract argmax decoding.
"""

__version__ = "0.1.0"

from .candidates import Candidate, LabeledCandidate, extract_candidates, label_candidates
from .corpus import Abstract, Section, Sentence, Token, load_corpus
from .pipeline import EvalReport, Prediction, clopper_pearson, evaluate, predict_size
from .svm import GridSpec, KernelParams, SvmModel, grid_search, load_model, save_model

__all__ = [
    "Abstract", "Section", "Sentence", "Token", "load_corpus",
    "Candidate", "LabeledCandidate", "extract_candidates", "label_candidates",
    "GridSpec", "KernelParams", "SvmModel", "grid_search", "load_model",
    "save_model", "EvalReport", "Prediction", "clopper_pearson", "evaluate",
    "predict_size", "__version__",
]

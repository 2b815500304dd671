"""Three-layer malware classification over instruction traces."""

from .errors import AlphaError
from .ingest import RawSample, SliceSpec, TimedInstruction, load_sample, parse_trace_line
from .normalize import FunctionSentence, NormalizationMode, normalize_instruction, segment_functions
from .pipeline import PipelineModels, Verdict, alpha_classify, calibrate_layers

__version__ = "0.1.0"

__all__ = [
    "AlphaError",
    "FunctionSentence",
    "NormalizationMode",
    "PipelineModels",
    "RawSample",
    "SliceSpec",
    "TimedInstruction",
    "Verdict",
    "alpha_classify",
    "calibrate_layers",
    "load_sample",
    "normalize_instruction",
    "parse_trace_line",
    "segment_functions",
    "__version__",
]

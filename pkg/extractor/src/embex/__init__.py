"""Window-embedding extractor for the SCUTEMB1 corpus format."""

from .audio import TARGET_RATE, AudioDecodeError, load_wav, to_target_rate
from .encoders import EncoderUnavailableError, LogMelEncoder, make_encoder
from .extract import ExtractorJob, FileOutcome, pool_windows, run_job
from .store import write_clip
from .windows import WindowConfig, window_bounds, window_count

__version__ = "0.1.0"

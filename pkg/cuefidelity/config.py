from typing import Any, Optional

import sec


def _load(name: str, default: Any) -> Any:
    value = sec.load(name, default)
    return default if value == "" else value


class Settings:
    """
    Defaults for the toolkit, read from the environment or secret files.

    Command-line options override these values; see the root CLI callback.
    """

    def __init__(
        self,
        seed: Optional[int] = 13,
        lexicon: Optional[str] = None,
        max_sequence_length: Optional[int] = 64,
        log_level: Optional[str] = "WARNING",
        workers: Optional[int] = 4,
    ):
        self.seed: int = int(_load("CUEFIDELITY_SEED", seed))
        self.lexicon: Optional[str] = _load("CUEFIDELITY_LEXICON", lexicon)
        self.max_sequence_length: int = int(
            _load("CUEFIDELITY_MAX_SEQUENCE_LENGTH", max_sequence_length)
        )
        self.log_level: str = str(_load("CUEFIDELITY_LOG_LEVEL", log_level)).upper()
        self.workers: int = int(_load("CUEFIDELITY_WORKERS", workers))
        self.write_manifest: bool = False

    def resolve_seed(self, seed: Optional[int]) -> int:
        return self.seed if seed is None else seed


settings: Settings = Settings()

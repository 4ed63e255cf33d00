from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from ..config import settings
from ..report import build_manifest, write_manifest


def record_run(
    output: Union[str, Path],
    inputs: Sequence[Union[str, Path]],
    seeds: Optional[Mapping[str, int]] = None,
    versions: Optional[Mapping[str, str]] = None,
) -> None:
    """
    Writes <output>.manifest.json when the global --manifest flag is set.
    """

    if settings.write_manifest:
        write_manifest(output, build_manifest(inputs, seeds=seeds, versions=versions))

from dataclasses import dataclass, field
from typing import Dict

from app.core.errors import EXIT_OK


@dataclass
class CommandOutput:
    """Rendered report plus any side files (name suffix -> content) next to --output."""

    text: str
    exit_code: int = EXIT_OK
    side_files: Dict[str, str] = field(default_factory=dict)

"""Rule-based quality checks for multi-sensor railway annotation files."""

from .config import ConfigError, RuleConfig, default_config, load_config
from .detectors import run_checks
from .issues import Issue, IssueType
from .model import ParseError, Scene, count_elements, dump_scene, parse_scene
from .report import Report, to_json, to_text

__all__ = [
    "ConfigError", "Issue", "IssueType", "ParseError", "Report", "RuleConfig", "Scene",
    "count_elements", "default_config", "dump_scene", "load_config", "parse_scene",
    "run_checks", "to_json", "to_text",
]
__version__ = "0.1.0"

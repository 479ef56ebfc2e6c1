from pathlib import Path


def get_project_root() -> Path:
    return Path(__file__).parent.parent.parent


def get_configs_dir() -> Path:
    return get_project_root() / "configs"


def resolve_against(path: str | Path, base_dir: Path | None) -> Path:
    """Resolve a possibly relative path against a base directory."""
    path = Path(path)
    if path.is_absolute() or base_dir is None:
        return path
    return base_dir / path

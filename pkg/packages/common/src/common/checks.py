import importlib.metadata
import os
import platform
import sys

import psutil

from common.logger import get_logger

logger = get_logger(__name__)


def package_version(name: str) -> str:
    """Installed version of a distribution, or 'missing'."""
    try:
        return importlib.metadata.version(name)
    except importlib.metadata.PackageNotFoundError:
        return "missing"


def available_workers(env_var: str | None = None) -> int:
    """
    Number of worker processes to use: logical cores, capped by `env_var`
    when that variable holds a positive integer.
    """
    cores = psutil.cpu_count(logical=True) or os.cpu_count() or 1
    raw = os.environ.get(env_var) if env_var else None
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            logger.warning(f"Ignoring non-integer {env_var}={raw!r}")
        else:
            if cap >= 1:
                return min(cores, cap)
            logger.warning(f"Ignoring non-positive {env_var}={raw!r}")
    return cores


def check_python(packages: tuple[str, ...] = ()) -> dict[str, str]:
    """
    Logs information about the Python environment and the versions of the
    given distributions. Returns the same information as a dict.
    """
    info = {
        "python_version": platform.python_version(),
        "python_architecture": platform.architecture()[0],
        "executable_path": sys.executable,
        "logical_cores": str(psutil.cpu_count(logical=True)),
    }
    info |= {name: package_version(name) for name in packages}

    for key, value in info.items():
        logger.info(f"{key}={value}")
    return info

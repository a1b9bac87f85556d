import statistics
import threading
import time
from collections.abc import Callable
from functools import wraps
from typing import Any

import humanfriendly
import psutil
from common.logger import get_logger

logger = get_logger(__name__)


def _monitor(stats: dict[str, list[float]], stop: threading.Event, interval: float = 0.5) -> None:
    """Sample CPU and RSS of this process and its worker children."""
    proc = psutil.Process()
    num_cores = psutil.cpu_count(logical=True) or 1
    while not stop.is_set():
        procs = [proc] + proc.children(recursive=True)
        cpu = rss = 0.0
        for p in procs:
            try:
                cpu += p.cpu_percent(interval=None)
                rss += p.memory_info().rss
            except psutil.Error:
                continue
        stats["cpu"].append(cpu / num_cores)
        stats["mem"].append(rss / 1024**2)
        stats["workers"].append(len(procs) - 1)
        time.sleep(interval)


def _summarize(stats: dict[str, list[float]], duration: float) -> None:
    cpu, mem, workers = stats["cpu"], stats["mem"], stats["workers"]
    num_cores = psutil.cpu_count(logical=True) or 1
    total_ram = psutil.virtual_memory().total / 1024**2
    avg_cpu = statistics.mean(cpu) if cpu else 0.0
    max_cpu = max(cpu, default=0.0)
    lines = [
        "Resource usage summary",
        f"Duration           : {humanfriendly.format_timespan(duration)}",
        f"CPU usage          : {avg_cpu:.2f}% avg / {max_cpu:.2f}% max",
        f"Logical cores used : {avg_cpu / 100 * num_cores:.2f} / {max_cpu / 100 * num_cores:.2f} of {num_cores}",
        f"RAM usage          : {statistics.mean(mem) if mem else 0:.2f} MB avg / {max(mem, default=0):.2f} MB max of {total_ram:.0f} MB",
        f"Worker processes   : {max(workers, default=0)} max",
    ]
    logger.info("\n".join(lines))


def with_resource_monitoring(enabled: bool = False):
    """Decorator logging CPU, RAM and worker usage of the wrapped run when enabled."""

    def decorator(func: Callable):
        @wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            if not enabled:
                return func(*args, **kwargs)

            logger.debug("Diagnostics enabled: monitoring system resources.")
            stats: dict[str, list[float]] = {"cpu": [], "mem": [], "workers": []}
            stop_event = threading.Event()
            thread = threading.Thread(target=_monitor, args=(stats, stop_event), daemon=True)
            start = time.time()
            thread.start()
            try:
                return func(*args, **kwargs)
            finally:
                stop_event.set()
                thread.join()
                _summarize(stats, time.time() - start)

        return wrapper

    return decorator

from __future__ import annotations

import logging
import typing as t
from pathlib import Path
from types import TracebackType

from nugget._cli.experiment import ExperimentConfig
from nugget._exceptions import ConfigError, DatasetIOError
from nugget._util import write_csv

logger = logging.getLogger(__name__)

LOCK_NAME = ".lock"
CONFIG_NAME = "experiment.conf"
RUN_LOG_NAME = "run.log"

_RUN_LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class ArtifactDir:
    """
    An output directory owned by one command at a time. While open it holds
    a `.lock` file and mirrors every `nugget` log record, with timestamps,
    into `run.log`.
    """

    def __init__(self, path: Path) -> None:
        self.path = path
        self._handler: logging.Handler | None = None

    @property
    def lock(self) -> Path:
        return self.path / LOCK_NAME

    def __enter__(self) -> t.Self:
        try:
            self.path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DatasetIOError(f"Cannot create output directory {self.path}") from e

        try:
            self.lock.touch(exist_ok=False)
        except FileExistsError as e:
            raise ConfigError(
                f"{self.path} is in use by another run (remove {self.lock} if it is stale)"
            ) from e

        handler = logging.FileHandler(self.path / RUN_LOG_NAME, mode="w", encoding="utf-8")
        handler.setFormatter(logging.Formatter(_RUN_LOG_FORMAT))
        handler.setLevel(logging.DEBUG)
        root = logging.getLogger("nugget")
        root.addHandler(handler)
        root.setLevel(logging.DEBUG)
        self._handler = handler
        logger.info("Writing artifacts to %s", self.path)
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        if self._handler:
            logging.getLogger("nugget").removeHandler(self._handler)
            self._handler.close()
            self._handler = None
        self.lock.unlink(missing_ok=True)

    def file(self, name: str) -> Path:
        return self.path / name

    def write_config(self, cfg: ExperimentConfig) -> Path:
        return write_config(cfg, self.file(CONFIG_NAME))

    def write_csv(
        self, name: str, header: t.Sequence[str], rows: t.Iterable[t.Sequence[t.Any]]
    ) -> Path:
        path = self.file(name)
        write_csv(path, header, rows)
        logger.info("Wrote %s", path)
        return path


def write_config(cfg: ExperimentConfig, path: Path) -> Path:
    try:
        path.write_text(cfg.dumps(), encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"Cannot write {path}") from e
    return path

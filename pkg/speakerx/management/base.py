"""Shared plumbing for the pipeline management commands."""
import logging
import os
from contextlib import contextmanager
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from ..config import load_config
from ..errors import InputError, MissingAudioError, TrialGenerationError
from ..systems import Workspace

logger = logging.getLogger(__name__)

LOCK_NAME = ".lock"


@contextmanager
def out_dir_lock(out_dir):
    """Exclusive ``.lock`` file in ``out_dir`` for the duration of a command."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise CommandError(f"{out_dir} is locked by another command (remove {lock} if stale)", returncode=2)
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)


def _describe(exc: InputError) -> str:
    offenders = getattr(exc, "offenders", None)
    if isinstance(exc, (MissingAudioError, TrialGenerationError)) and offenders:
        listed = "\n  ".join(offenders[:10])
        more = f"\n  ... and {len(offenders) - 10} more" if len(offenders) > 10 else ""
        return f"{exc}\n  {listed}{more}"
    return str(exc)


class PipelineCommand(BaseCommand):
    """Loads the pipeline config, locks ``--out-dir`` and maps input errors to exit code 2.

    Subclasses implement ``add_command_arguments``, ``default_out_dir`` and ``run``.
    """

    def add_arguments(self, parser):
        parser.add_argument("--config", default=settings.SPEAKERX_CONFIG,
                            help="Pipeline YAML config (default: %(default)s).")
        parser.add_argument("--out-dir", default=None,
                            help="Output directory (default: derived from the config workdir).")
        parser.add_argument("--jobs", type=int, default=None,
                            help="Worker threads (default: config jobs, else SPEAKERX_JOBS).")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def default_out_dir(self, workspace: Workspace, config, opts) -> Path:
        return workspace.root

    def run(self, config, workspace: Workspace, out_dir: Path, opts):
        raise NotImplementedError

    def jobs(self, config, opts) -> int:
        return max(1, int(opts.get("jobs") or config.jobs or settings.SPEAKERX_JOBS))

    def handle(self, *args, **opts):
        try:
            config = load_config(opts["config"])
            workspace = Workspace(Path(config.paths.workdir))
            out_dir = Path(opts["out_dir"]) if opts.get("out_dir") else self.default_out_dir(workspace, config, opts)
            with out_dir_lock(out_dir):
                self.run(config, workspace, out_dir, opts)
        except InputError as exc:
            raise CommandError(_describe(exc), returncode=2) from exc

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))

    def info(self, message):
        self.stdout.write(self.style.HTTP_INFO(message))

    def warn(self, message):
        self.stdout.write(self.style.WARNING(message))

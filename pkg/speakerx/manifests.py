"""JSON-lines manifests for corpora, mixtures and extracted speech.

Paths are stored relative to the manifest's directory and resolved on read,
so a manifest tree can be moved without rewriting it.
"""
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from .errors import FormatError, InputError

SPLITS = ("train", "dev", "test")


def write_jsonl(path, rows: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            fh.write("\n")
    return path


def read_jsonl(path) -> List[dict]:
    path = Path(path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
    return rows


def _relative(path, base: Path) -> str:
    return Path(os.path.relpath(Path(path).resolve(), base.resolve())).as_posix()


def _resolve(value: str, base: Path) -> str:
    p = Path(value)
    return str(p if p.is_absolute() else (base / p))


@dataclass(frozen=True)
class Utterance:
    utt: str
    spk: str
    path: str
    dur_s: float
    split: Optional[str] = None


@dataclass
class CorpusManifest:
    records: List[Utterance] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def by_id(self) -> Dict[str, Utterance]:
        return {r.utt: r for r in self.records}

    def speakers(self, split=None) -> List[str]:
        spks = {r.spk for r in self.records if split is None or r.split == split}
        return sorted(spks)

    def utterances_of(self, spk) -> List[Utterance]:
        return sorted((r for r in self.records if r.spk == spk), key=lambda r: r.utt)

    def speaker_split(self) -> Dict[str, str]:
        return {r.spk: r.split for r in self.records}

    def save(self, path) -> Path:
        base = Path(path).parent
        rows = []
        for r in self.records:
            row = {"utt": r.utt, "spk": r.spk, "path": _relative(r.path, base), "dur_s": round(r.dur_s, 6)}
            if r.split is not None:
                row["split"] = r.split
            rows.append(row)
        return write_jsonl(path, rows)

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        return cls(read_utterances(path))


def read_utterances(path) -> List[Utterance]:
    """Read any manifest whose rows carry ``utt``, ``spk`` and ``path``.

    Corpus manifests and extracted-speech manifests both qualify, which is
    what lets back-end training pool them.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"manifest not found: {path}")
    base = path.parent
    out = []
    for row in read_jsonl(path):
        try:
            out.append(Utterance(
                utt=str(row["utt"]),
                spk=str(row["spk"]),
                path=_resolve(row["path"], base),
                dur_s=float(row.get("dur_s", 0.0)),
                split=row.get("split"),
            ))
        except KeyError as exc:
            raise FormatError(f"{path}: record without {exc.args[0]!r}: {row}") from exc
    return out


@dataclass(frozen=True)
class MixtureSpec:
    mix_id: str
    target: str
    interferer: str
    aux: str
    snr_db: float
    split: str


@dataclass
class MixtureRecord:
    mix_id: str
    target: str
    interferer: str
    aux: str
    snr_db: float
    split: str
    target_spk: str
    interferer_spk: str
    mix_path: str
    ref_path: str
    aux_path: str
    dur_s: float
    norm_gain: float = 1.0

    @property
    def spec(self) -> MixtureSpec:
        return MixtureSpec(self.mix_id, self.target, self.interferer, self.aux, self.snr_db, self.split)


_PATH_FIELDS = ("mix_path", "ref_path", "aux_path")


def save_mixtures(path, records: Iterable[MixtureRecord]) -> Path:
    base = Path(path).parent
    rows = []
    for rec in records:
        row = asdict(rec)
        for key in _PATH_FIELDS:
            row[key] = _relative(row[key], base)
        row["snr_db"] = round(row["snr_db"], 6)
        row["dur_s"] = round(row["dur_s"], 6)
        row["norm_gain"] = round(row["norm_gain"], 9)
        rows.append(row)
    return write_jsonl(path, rows)


def load_mixtures(path) -> List[MixtureRecord]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"mixture manifest not found: {path}")
    base = path.parent
    names = {f.name for f in fields(MixtureRecord)}
    out = []
    for row in read_jsonl(path):
        missing = names - set(row) - {"norm_gain"}
        if missing:
            raise FormatError(f"{path}: mixture record missing {sorted(missing)}: {row.get('mix_id')}")
        kwargs = {k: row[k] for k in names if k in row}
        for key in _PATH_FIELDS:
            kwargs[key] = _resolve(kwargs[key], base)
        out.append(MixtureRecord(**kwargs))
    return out


def save_extracted(path, rows: Iterable[dict]) -> Path:
    """Extracted rows mirror mixture rows plus ``utt``/``spk``/``path``."""
    base = Path(path).parent
    out = []
    for row in rows:
        row = dict(row)
        for key in ("path",) + _PATH_FIELDS:
            if key in row:
                row[key] = _relative(row[key], base)
        out.append(row)
    return write_jsonl(path, out)


def load_extracted(path) -> List[dict]:
    path = Path(path)
    base = path.parent
    rows = read_jsonl(path)
    for row in rows:
        for key in ("path",) + _PATH_FIELDS:
            if key in row:
                row[key] = _resolve(row[key], base)
    return rows

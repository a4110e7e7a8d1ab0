import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ...audio import load_wav
from ...backend import Verifier, load_backend
from ...errors import InputError, MissingAudioError
from ...extractor import extract, load_model
from ...frontend import extract_features
from ...manifests import load_mixtures, read_utterances
from ...metrics import ScoreSet, write_scores
from ...systems import CLEAN
from ...trials import read_trials
from ..base import PipelineCommand

logger = logging.getLogger(__name__)

SCORES_NAME = "scores.txt"


def audio_index(corpus_path: Path, mixtures_path: Path):
    """utterance / mixture id -> wav path."""
    index = {}
    if corpus_path.is_file():
        index.update({u.utt: u.path for u in read_utterances(corpus_path)})
    if mixtures_path.is_file():
        index.update({m.mix_id: m.mix_path for m in load_mixtures(mixtures_path)})
    return index


def resolve_audio(trials, index):
    ids = sorted({t.enroll for t in trials} | {t.test for t in trials})
    offenders = [i for i in ids if i not in index]
    offenders += [f"{i} ({index[i]})" for i in ids if i in index and not Path(index[i]).is_file()]
    if offenders:
        raise MissingAudioError(f"{len(offenders)} trial utterance(s) have no audio", offenders)
    return {i: index[i] for i in ids}


class Command(PipelineCommand):
    help = "Score a trial list with a trained back-end, optionally extracting the target speaker first."

    def add_command_arguments(self, parser):
        parser.add_argument("--backend", default=None,
                            help="Back-end model (default: <workdir>/backend/clean/backend.bin).")
        parser.add_argument("--trials", default=None,
                            help="Trial list (default: <workdir>/trials/trials_mixture.txt).")
        parser.add_argument("--corpus", default=None,
                            help="Corpus manifest resolving utterance ids (default: <workdir>/corpus/corpus.jsonl).")
        parser.add_argument("--mixtures", default=None,
                            help="Mixture manifest resolving mixture ids "
                                 "(default: <workdir>/mixtures/mixtures.jsonl).")
        parser.add_argument("--tse", default="none",
                            help="'none' to score the raw test audio, or an extractor model path "
                                 "conditioned on each trial's enrollment (default: %(default)s).")

    def default_out_dir(self, workspace, config, opts):
        return workspace.root / "scores"

    def run(self, config, workspace, out_dir, opts):
        backend_path = Path(opts["backend"]) if opts["backend"] else workspace.backend_model(CLEAN)
        if not backend_path.is_file():
            raise InputError(f"back-end model not found: {backend_path}")
        trials = read_trials(Path(opts["trials"]) if opts["trials"] else workspace.trials("mixture"))
        if not trials:
            raise InputError("trial list is empty")
        extractor = None
        if opts["tse"] != "none":
            if not Path(opts["tse"]).is_file():
                raise InputError(f"extractor model not found: {opts['tse']}")
            extractor = load_model(opts["tse"])

        paths = resolve_audio(trials, audio_index(
            Path(opts["corpus"]) if opts["corpus"] else workspace.corpus_manifest,
            Path(opts["mixtures"]) if opts["mixtures"] else workspace.mixtures_manifest,
        ))
        verifier = Verifier(load_backend(backend_path))
        frontend = config.frontend

        def embed(wave):
            return verifier.embed(extract_features(wave, frontend.cmn_window, frontend.vad_threshold))

        def embed_test(key):
            enroll, test = key
            wave = load_wav(paths[test])
            if extractor is not None:
                wave = extract(extractor, wave, load_wav(paths[enroll]))
            return embed(wave)

        def test_key(trial):
            # with extraction the test embedding depends on the enrollment used as auxiliary speech
            return (trial.enroll if extractor is not None else None, trial.test)

        enrolls = sorted({t.enroll for t in trials})
        tests = sorted({test_key(t) for t in trials}, key=str)
        jobs = self.jobs(config, opts)
        kind = "extractions" if extractor is not None else "utterances"
        self.info(f"Embedding {len(enrolls)} enrollments and {len(tests)} test {kind}")
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            enroll_vecs = dict(zip(enrolls, pool.map(lambda u: embed(load_wav(paths[u])), enrolls)))
            test_vecs = dict(zip(tests, pool.map(embed_test, tests)))

        scores = [verifier.score(enroll_vecs[t.enroll], test_vecs[test_key(t)]) for t in trials]
        path = write_scores(out_dir / SCORES_NAME, ScoreSet(trials, scores))
        logger.info("scored %d trials", len(trials))
        self.success(f"Wrote {len(trials)} scores -> {path}")

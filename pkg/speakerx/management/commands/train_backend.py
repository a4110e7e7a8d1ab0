from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ...audio import load_wav
from ...backend import save_backend, train_backend
from ...backend.ivector import write_ivectors
from ...errors import InputError, MissingAudioError
from ...frontend import extract_features, write_feature_archive
from ...manifests import read_utterances
from ...systems import CLEAN, CLEAN_EXT
from ..base import PipelineCommand

MODEL_NAME = "backend.bin"
IVECTORS_NAME = "ivectors.ark"
FEATURES_NAME = "features.ark"
TRAINING_SPLITS = ("train", "dev")


def pooled_utterances(manifests):
    """Union of the train/dev records of every manifest; utterance ids must be unique."""
    pooled = {}
    for manifest in manifests:
        for utt in read_utterances(manifest):
            if utt.split not in TRAINING_SPLITS:
                continue
            if utt.utt in pooled:
                raise InputError(f"utterance {utt.utt!r} appears in more than one training manifest")
            pooled[utt.utt] = utt
    return [pooled[k] for k in sorted(pooled)]


def check_audio(paths):
    missing = [str(p) for p in paths if not Path(p).is_file()]
    if missing:
        raise MissingAudioError(f"{len(missing)} referenced audio file(s) are missing", missing)


def compute_features(utts, frontend_cfg, jobs):
    def one(utt):
        return extract_features(load_wav(utt.path), frontend_cfg.cmn_window, frontend_cfg.vad_threshold)

    if jobs <= 1:
        feats = [one(u) for u in utts]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            feats = list(pool.map(one, utts))
    return {u.utt: f for u, f in zip(utts, feats)}


class Command(PipelineCommand):
    help = "Train the UBM / T-matrix / LDA / PLDA back-end on the train/dev records of one or more manifests."

    def add_command_arguments(self, parser):
        parser.add_argument("--manifest", action="append", default=None,
                            help="Training manifest; repeat to pool clean and extracted speech "
                                 "(default: <workdir>/corpus/corpus.jsonl).")
        parser.add_argument("--dump-features", action="store_true",
                            help="Also write the training features to features.ark.")
        parser.add_argument("--ubm-components", type=int, default=None, help="UBM size (default: config).")
        parser.add_argument("--tv-rank", type=int, default=None, help="Total factors (default: config).")
        parser.add_argument("--lda-dim", type=int, default=None, help="LDA output size (default: config).")
        parser.add_argument("--plda-dim", type=int, default=None, help="PLDA latent size (default: config).")
        parser.add_argument("--seed", type=int, default=None, help="Back-end seed (default: config).")

    def default_out_dir(self, workspace, config, opts):
        manifests = opts.get("manifest") or []
        return workspace.backend_dir(CLEAN_EXT if len(manifests) > 1 else CLEAN)

    def run(self, config, workspace, out_dir, opts):
        cfg = config.with_overrides("backend", ubm_components=opts["ubm_components"], tv_rank=opts["tv_rank"],
                                    lda_dim=opts["lda_dim"], plda_dim=opts["plda_dim"],
                                    seed=opts["seed"]).backend
        manifests = [Path(m) for m in (opts["manifest"] or [workspace.corpus_manifest])]
        utts = pooled_utterances(manifests)
        if not utts:
            raise InputError("no train/dev records in " + ", ".join(str(m) for m in manifests))
        check_audio(u.path for u in utts)

        jobs = self.jobs(config, opts)
        self.info(f"Computing features for {len(utts)} utterances")
        features = compute_features(utts, config.frontend, jobs)
        training = train_backend(features, {u.utt: u.spk for u in utts}, cfg, jobs)

        path = save_backend(out_dir / MODEL_NAME, training.model)
        write_ivectors(out_dir / IVECTORS_NAME, training.ivectors)
        if opts["dump_features"]:
            write_feature_archive(out_dir / FEATURES_NAME, features)
        self.success(f"Back-end trained on {len(utts)} utterances -> {path}")

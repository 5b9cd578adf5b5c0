"""Command line front end. Every subcommand is a thin adapter over the
library; the only logic here is flag parsing, config merging, and file IO.

Setting precedence, lowest to highest: built-in defaults, then a JSON config
file given with --config, then explicit flags. Effective settings are echoed
to a .meta.json sidecar next to any output the command writes.
"""
from __future__ import annotations

import argparse
import json
import pathlib
import sys

from . import __version__
from .dsp import DspError, load_wav, mix_at_snr, save_wav
from .evaluation import (Manifest, TTestResult, emit_report, evaluate_corpus,
                         load_manifest, paired_t_test_one_tailed,
                         training_pairs)
from .mmse import MmseConfig, enhance_mmse
from .nn import (WEIGHTS_FORMAT_VERSION, TrainConfig, ddae_enhance,
                 ddae_model, fcn_forward, fcn_model, load_model, save_model,
                 train)
from .stoi import StoiConfig, stoi
from .vocoder import EasVocoderConfig, channel_envelopes, preemphasize, \
    save_envelopes_csv, vocode_eas

DEFAULT_SEED = 1729

# built-in defaults per subcommand, overridable by --config then by flags
_DEFAULTS = {
    "mix": {"seed": DEFAULT_SEED},
    "enhance": {"method": "mmse", "model": None},
    "vocode": {"acoustic_cutoff_hz": 500.0, "acoustic_order": 6,
               "preemph_corner_hz": 2000.0, "band_edges": None,
               "band_order": 6, "env_cutoff_hz": 400.0, "env_order": 4,
               "carrier": "white", "rng_seed": DEFAULT_SEED,
               "utterance_id": None, "envelopes": None},
    "stoi": {},
    "train": {"method": "fcn", "objective": "combined", "alpha": 10.0,
              "seed": DEFAULT_SEED, "epochs": 10, "lr": 1e-3,
              "batch_size": 1, "optimizer": "adam", "noises": None,
              "snrs": None, "layers": 8, "channels": 30, "filter_width": 55,
              "context": 2, "hidden": "256,256"},
    "evaluate": {"methods": "noisy,mmse", "noises": None, "snrs": None,
                 "seed": DEFAULT_SEED, "models_dir": None, "format": None},
    "ttest": {"out": None},
    "serve": {"models": None, "port": 8000, "host": "127.0.0.1",
              "store": "sessions", "cache": "stimuli"},
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="easlab",
        description="speech enhancement, vocoder simulation, and evaluation")
    parser.add_argument(
        "--version", action="version",
        version=f"easlab {__version__} (weights format {WEIGHTS_FORMAT_VERSION})")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file of settings; flags override")
        p.add_argument("-v", "--verbose", action="count", default=0)
        return p

    p = add("mix", "mix clean speech with noise at a target SNR")
    p.add_argument("clean"); p.add_argument("noise"); p.add_argument("out")
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--seed", type=int, help=f"default {DEFAULT_SEED}")

    p = add("enhance", "denoise a wav file")
    p.add_argument("infile"); p.add_argument("out")
    p.add_argument("--method", choices=["mmse", "ddae", "fcn"])
    p.add_argument("--model", help="weights file, required for ddae/fcn")

    p = add("vocode", "simulate combined acoustic and electric hearing")
    p.add_argument("infile"); p.add_argument("out")
    p.add_argument("--envelopes", help="also write channel envelopes as CSV")
    p.add_argument("--utterance-id", dest="utterance_id",
                   help="carrier seeding label, default input stem")
    p.add_argument("--acoustic-cutoff-hz", dest="acoustic_cutoff_hz", type=float)
    p.add_argument("--acoustic-order", dest="acoustic_order", type=int)
    p.add_argument("--preemph-corner-hz", dest="preemph_corner_hz", type=float)
    p.add_argument("--band-edges", dest="band_edges",
                   help='JSON, e.g. "[[500,1017],[1017,1901]]"')
    p.add_argument("--band-order", dest="band_order", type=int)
    p.add_argument("--env-cutoff-hz", dest="env_cutoff_hz", type=float)
    p.add_argument("--env-order", dest="env_order", type=int)
    p.add_argument("--carrier")
    p.add_argument("--rng-seed", dest="rng_seed", type=int)

    p = add("stoi", "print the intelligibility score of a pair of wavs")
    p.add_argument("reference"); p.add_argument("degraded")

    p = add("train", "fit an enhancement model on a manifest's train split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="weights file to write")
    p.add_argument("--method", choices=["fcn", "ddae"])
    p.add_argument("--objective", choices=["mse", "stoi", "combined"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--optimizer", choices=["adam", "sgd"])
    p.add_argument("--noises", help="comma list, default all train noises")
    p.add_argument("--snrs",
                   help='comma list of training SNRs, required; use the '
                        'equals form for negatives, e.g. --snrs="-5,0,5"')
    p.add_argument("--layers", type=int)
    p.add_argument("--channels", type=int)
    p.add_argument("--filter-width", dest="filter_width", type=int)
    p.add_argument("--context", type=int)
    p.add_argument("--hidden", help="comma list of layer widths")

    p = add("evaluate", "score methods over a manifest's test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--methods", help="comma list")
    p.add_argument("--noises", help="comma list, default all test noises")
    p.add_argument("--snrs", help='comma list, required; --snrs="-5,0,5"')
    p.add_argument("--seed", type=int)
    p.add_argument("--models-dir", dest="models_dir")
    p.add_argument("--format", choices=["csv", "json"],
                   help="default from --out suffix")

    p = add("ttest", "dependent one-tailed t test: does score list b beat a?")
    p.add_argument("--a", required=True,
                   help="JSON list of scores, inline or a file path")
    p.add_argument("--b", required=True,
                   help="JSON list of scores, inline or a file path")
    p.add_argument("--out", help="also write the result as JSON")

    p = add("serve", "start the listening-test HTTP service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--models", help="directory with fcn.easm / ddae.easm")
    p.add_argument("--port", type=int)
    p.add_argument("--host")
    p.add_argument("--store", help="session log directory")
    p.add_argument("--cache", help="stimulus cache directory")

    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags; unknown config keys error."""
    settings = dict(_DEFAULTS[args.subcommand])
    known = set(vars(args))
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        for key, value in loaded.items():
            if key not in settings and key not in known:
                raise DspError(f"config key {key!r} not valid for "
                               f"{args.subcommand!r}")
            settings[key] = value
    for key, value in vars(args).items():
        if key in ("config", "subcommand"):
            continue
        if value is not None or key not in settings:
            settings[key] = value
    return settings


def _csv_list(text, cast=str):
    return [cast(tok) for tok in str(text).split(",") if tok != ""]


def _write_meta(out_path, subcommand: str, settings: dict) -> None:
    meta = {"tool": f"easlab {__version__}",
            "weights_format_version": WEIGHTS_FORMAT_VERSION,
            "subcommand": subcommand,
            "settings": {k: v for k, v in sorted(settings.items())
                         if k != "verbose"}}
    pathlib.Path(f"{out_path}.meta.json").write_text(
        json.dumps(meta, indent=2) + "\n")


def _load_models_dir(path) -> dict:
    models = {}
    if path:
        for name in ("fcn", "ddae"):
            candidate = pathlib.Path(path) / f"{name}.easm"
            if candidate.exists():
                models[name] = load_model(candidate)
    return models


def _vocoder_config(s: dict) -> EasVocoderConfig:
    kwargs = {}
    for key in ("acoustic_cutoff_hz", "acoustic_order", "preemph_corner_hz",
                "band_order", "env_cutoff_hz", "env_order", "carrier",
                "rng_seed"):
        kwargs[key] = s[key]
    edges = s["band_edges"]
    if edges is not None:
        if isinstance(edges, str):
            edges = json.loads(edges)
        kwargs["band_edges"] = tuple(tuple(float(e) for e in pair)
                                     for pair in edges)
    return EasVocoderConfig(**kwargs)


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_mix(s):
    clean = load_wav(s["clean"])
    noise = load_wav(s["noise"])
    mixture = mix_at_snr(clean, noise, s["snr"], rng_seed=s["seed"]).mixture
    save_wav(mixture, s["out"])
    _write_meta(s["out"], "mix", s)
    return 0


def _cmd_enhance(s):
    noisy = load_wav(s["infile"])
    if s["method"] == "mmse":
        out = enhance_mmse(noisy, MmseConfig())
    else:
        if not s["model"]:
            raise DspError(f"--model is required for method {s['method']!r}")
        model = load_model(s["model"])
        out = (fcn_forward(model, noisy) if s["method"] == "fcn"
               else ddae_enhance(model, noisy))
    save_wav(out, s["out"])
    _write_meta(s["out"], "enhance", s)
    return 0


def _cmd_vocode(s):
    buf = load_wav(s["infile"])
    config = _vocoder_config(s)
    utt_id = s["utterance_id"] or pathlib.Path(s["infile"]).stem
    out = vocode_eas(buf, config, utterance_id=utt_id)
    save_wav(out, s["out"])
    if s["envelopes"]:
        env = channel_envelopes(preemphasize(buf, config), config)
        save_envelopes_csv(env, s["envelopes"])
    _write_meta(s["out"], "vocode", s)
    return 0


def _cmd_stoi(s):
    ref = load_wav(s["reference"])
    deg = load_wav(s["degraded"])
    print(f"{stoi(ref, deg, StoiConfig()).value:.6f}")
    return 0


def _cmd_train(s):
    if s["snrs"] is None:
        raise DspError("--snrs is required for train")
    manifest = load_manifest(s["manifest"])
    noises = (_csv_list(s["noises"]) if s["noises"] else
              sorted(n.noise_id for n in manifest.split_noises("train")))
    dataset = training_pairs(manifest, noises, _csv_list(s["snrs"], float),
                             s["seed"])
    if s["method"] == "fcn":
        model = fcn_model(s["layers"], s["channels"], s["filter_width"],
                          rng_seed=s["seed"])
    else:
        hidden = tuple(_csv_list(s["hidden"], int))
        model = ddae_model(context=s["context"], hidden_sizes=hidden,
                           rng_seed=s["seed"])
    config = TrainConfig(objective=s["objective"], alpha=s["alpha"],
                         learning_rate=s["lr"], epochs=s["epochs"],
                         batch_size=s["batch_size"], rng_seed=s["seed"],
                         optimizer=s["optimizer"])
    result = train(model, dataset, config)
    for epoch, value in enumerate(result.loss_curve):
        print(f"epoch {epoch} loss {value:.6g}", file=sys.stderr)
    save_model(result.model, s["out"])
    _write_meta(s["out"], "train", s)
    return 0


def _cmd_evaluate(s):
    if s["snrs"] is None:
        raise DspError("--snrs is required for evaluate")
    manifest = load_manifest(s["manifest"])
    noises = (_csv_list(s["noises"]) if s["noises"] else
              sorted(n.noise_id for n in manifest.split_noises("test")))
    models = _load_models_dir(s["models_dir"])
    table = evaluate_corpus(manifest, _csv_list(s["methods"]), noises,
                            _csv_list(s["snrs"], float), s["seed"],
                            models=models or None)
    fmt = s["format"] or ("json" if str(s["out"]).endswith(".json") else "csv")
    emit_report(table, fmt, s["out"])
    _write_meta(s["out"], "evaluate", s)
    return 0


def _load_scores(arg: str) -> list:
    # an inline JSON list starts with "["; anything else is a file of one
    if arg.lstrip().startswith("["):
        return json.loads(arg)
    with open(arg) as fh:
        return json.load(fh)


def _cmd_ttest(s):
    scores_a = _load_scores(s["a"])
    scores_b = _load_scores(s["b"])
    result = paired_t_test_one_tailed(scores_a, scores_b)
    print(f"t {result.t_statistic:.6g}  df {result.degrees_of_freedom}  "
          f"p {result.p_value:.6g}")
    if s["out"]:
        emit_report(result, "json", s["out"])
        _write_meta(s["out"], "ttest", s)
    return 0


def _cmd_serve(s):
    import uvicorn

    from .listening import DEFAULT_METHODS, create_app

    manifest = load_manifest(s["manifest"])
    models = _load_models_dir(s["models"])
    methods = tuple(m for m in DEFAULT_METHODS
                    if m in ("noisy", "mmse") or m in models)
    app = create_app(manifest, models or None, s["store"], s["cache"],
                     methods=methods)
    print(f"serving on {s['host']}:{s['port']} with methods {methods}",
          file=sys.stderr)
    uvicorn.run(app, host=s["host"], port=s["port"], log_level="warning")
    return 0


_COMMANDS = {"mix": _cmd_mix, "enhance": _cmd_enhance, "vocode": _cmd_vocode,
             "stoi": _cmd_stoi, "train": _cmd_train,
             "evaluate": _cmd_evaluate, "ttest": _cmd_ttest,
             "serve": _cmd_serve}


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        settings = _resolve(args)
        return _COMMANDS[args.subcommand](settings)
    except (DspError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

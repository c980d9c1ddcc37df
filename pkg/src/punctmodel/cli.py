"""Command-line interface: ``punctmodel <command> [options]``.

Every command accepts ``--config FILE`` with ``key = value`` lines naming
long options (dashes or underscores); explicit flags override the file.
Logs go to standard error; data goes to files or standard output.

Exit codes: 0 success, 2 unreadable or inconsistent input, 3 nothing
trainable, 4 relations unknown to the model (with ``--no-backoff``).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import torch

from .corpus import (START_MARK, ConlluError, PreprocessConfig, count_words, load_treebank,
                     normalize, parse_conllu, preprocess, write_conllu)
from .forest import Unexplainable, viterbi_underlying
from .model import ModelFormatError, PunctuationModel
from .tasks import (EditSet, FilePermutation, MbrConfig, ShufflePermutation, aed,
                    channel_report, correct, f_beta_counts, identity_order, perplexity, rephrase,
                    rephrase_base, rephrase_half, restore, slot_distance, to_raw_sentence,
                    train_correction, tree_to_raw, trigram_ppl, trivial_baseline,
                    underlying_misc)
from .train import TrainConfig, TrainingError, sentence_rng, train

log = logging.getLogger("punctmodel")

EXIT_INPUT, EXIT_EMPTY, EXIT_RELATIONS = 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Input helpers
# ---------------------------------------------------------------------------

def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_INPUT) from None


def _raw(path: str) -> list:
    try:
        return parse_conllu(_read_text(path))
    except ConlluError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None


def _model(path: str) -> PunctuationModel:
    try:
        return PunctuationModel.loads(_read_text(path))
    except (ModelFormatError, ValueError) as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None


def _observed(path: str, start_mark: str) -> list:
    """Punctuated input prepared like training data (no UNK replacement)."""
    cfg = PreprocessConfig(unk_threshold=1, start_mark=start_mark)
    sentences, rejected = load_treebank(preprocess(_raw(path), cfg))
    if rejected:
        log.warning("%s: skipped %s", path, dict(rejected))
    return sentences


def _trees(path: str) -> list:
    sentences, rejected = load_treebank(_raw(path))
    if rejected:
        log.warning("%s: skipped %s", path, dict(rejected))
    return sentences


def _check_relations(model: PunctuationModel, sentences: Sequence, strict: bool) -> None:
    unknown = sorted({nd.deprel for s in sentences for nd in s.tree.nodes} - model.relations())
    if not unknown:
        return
    if strict:
        raise CliError("relations unknown to the model: " + ", ".join(unknown), EXIT_RELATIONS)
    log.info("relations unknown to the model attach nothing: %s", ", ".join(unknown))


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _tsv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = ["\t".join(header)]
    lines += ["\t".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    return f"{v:.10g}" if isinstance(v, float) else str(v)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _train_config(args, direction: str | None = None) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, batch_size=args.batch_size,
                       sentences_per_epoch=args.per_epoch, epochs=args.epochs, l2=args.l2,
                       pr=args.pr, square_pr=args.square_pr, pr_mode=args.pr_mode,
                       seed=args.seed, direction=direction or args.direction,
                       channel=args.channel)


def _save_result(result, out: str, meta: dict) -> None:
    result.model.meta.update(meta)
    result.best_model.meta.update(meta, best_epoch=str(result.best_epoch))
    result.model.save(out)
    result.best_model.save(out + ".best")
    Path(out + ".log.tsv").write_text(result.log_tsv(), encoding="utf-8")
    log.info("wrote %s (dev-best epoch %d in %s.best)", out, result.best_epoch, out)


def cmd_train(args) -> int:
    cfg = PreprocessConfig(unk_threshold=args.unk_threshold, start_mark=args.start_mark)
    raw_train = _raw(args.train)
    raw_dev = _raw(args.dev) if args.dev else []
    counts = count_words(normalize(s, cfg) for s in raw_train)
    train_set, rejected = load_treebank(preprocess(raw_train, cfg, counts))
    dev_set, _ = load_treebank(preprocess(raw_dev, cfg, counts))
    log.info("training sentences: %d (rejected %s), dev: %d", len(train_set), dict(rejected),
             len(dev_set))
    if not train_set:
        raise CliError("no trainable sentences", EXIT_EMPTY)
    try:
        result = train(train_set, _train_config(args), dev=dev_set)
    except TrainingError as exc:
        raise CliError(str(exc), EXIT_EMPTY) from None
    meta = {"unk_threshold": str(args.unk_threshold), "start_mark": args.start_mark or ""}
    if result.direction_scores:
        meta["direction_scores"] = " ".join(f"{d}={v:.6g}" for d, v in
                                            sorted(result.direction_scores.items()))
    _save_result(result, args.out, meta)
    return 0


def cmd_train_correction(args) -> int:
    esl_model, cesl_model = _model(args.esl_model), _model(args.cesl_model)
    esl = _observed(args.train_esl, args.start_mark)
    cesl = {s.sent_id: s for s in _observed(args.train_cesl, args.start_mark)}
    pairs = [(e, cesl[e.sent_id]) for e in esl if e.sent_id in cesl]
    if not pairs:
        raise CliError("no sentence ids shared by the two treebanks", EXIT_EMPTY)
    try:
        result = train_correction(pairs, esl_model, cesl_model,
                                  _train_config(args, cesl_model.phi.direction),
                                  anchor_strength=args.anchor_strength)
    except TrainingError as exc:
        raise CliError(str(exc), EXIT_EMPTY) from None
    _save_result(result, args.out, {"task": "correction"})
    return 0


def cmd_inspect_channel(args) -> int:
    model = _model(args.model)
    treebank = _observed(args.treebank, args.start_mark) if args.treebank else []
    rows = [(r.a, r.b, *(float(p) for p in r.probs), r.count)
            for r in channel_report(model, treebank)]
    _write(args.output, _tsv(("a", "b", "keep", "leftAbsorb", "rightAbsorb", "transpose",
                              "count"), rows))
    return 0


def cmd_perplexity(args) -> int:
    model = _model(args.model)
    sentences = _observed(args.input, args.start_mark)
    _check_relations(model, sentences, args.no_backoff)
    rep = perplexity(sentences, model)
    _write(args.output, _tsv(("sentences", "slots", "excluded", "log_likelihood", "perplexity"),
                             [(rep.sentences, rep.slots, len(rep.excluded), rep.log_likelihood,
                               rep.perplexity)]))
    return 0


def _strip(slots: list, start_mark: str) -> list:
    return [tuple(t for t in s if t != start_mark) for s in slots]


def cmd_restore(args) -> int:
    sentences = _trees(args.input)
    out = []
    if args.trivial:
        for s in sentences:
            s.slots = trivial_baseline(s.tree, args.final_mark)
            out.append(to_raw_sentence(s))
    else:
        model = _model(args.model)
        _check_relations(model, sentences, args.no_backoff)
        mbr = MbrConfig(args.samples, args.seed)
        for s in sentences:
            s.slots = restore(s.tree, model, mbr)
            out.append(to_raw_sentence(s, drop=(args.start_mark,)))
    _write(args.output, write_conllu(out))
    return 0


def cmd_correct(args) -> int:
    esl_model, model = _model(args.esl_model), _model(args.model)
    sentences = _observed(args.input, args.start_mark)
    _check_relations(esl_model, sentences, args.no_backoff)
    mbr = MbrConfig(args.samples, args.seed)
    out, fallbacks = [], 0
    for s in sentences:
        res = correct(s, esl_model, model, mbr)
        fallbacks += res.fallback
        s.slots = res.slots
        out.append(to_raw_sentence(s, drop=(args.start_mark,)))
    if fallbacks:
        log.warning("%d sentences restored without their input punctuation", fallbacks)
    _write(args.output, write_conllu(out))
    return 0


def cmd_rephrase(args) -> int:
    sentences = _observed(args.input, args.start_mark)
    model = _model(args.model) if args.method != "base" else None
    if model is not None:
        _check_relations(model, sentences, args.no_backoff)
    perms = FilePermutation.parse(_read_text(args.permutations)) if args.permutations else None
    out, flagged = [], 0
    for s in sentences:
        order = perms or ShufflePermutation(sentence_rng(args.seed, s.sent_id))
        if args.identity:
            order = identity_order
        rng = sentence_rng(args.seed + 1, s.sent_id)
        if args.method == "base":
            out.append(tree_to_raw(rephrase_base(s, order)))
            continue
        fn = rephrase_half if args.method == "half" else rephrase
        res = fn(s, model, order, rng, args.argmax)
        flagged += res.flagged
        out.append(to_raw_sentence(res.sentence, drop=(args.start_mark,)))
    if flagged:
        log.warning("%d unexplainable sentences passed through unchanged", flagged)
    _write(args.output, write_conllu(out))
    return 0


def cmd_recover(args) -> int:
    model = _model(args.model)
    sentences = _observed(args.input, args.start_mark)
    _check_relations(model, sentences, args.no_backoff)
    out, lines = [], []
    for s in sentences:
        try:
            pt, _ = viterbi_underlying(s, model)
        except Unexplainable:
            log.warning("sentence %s unexplainable; skipped", s.sent_id)
            continue
        lines.append(pt.bracketed())
        out.append(to_raw_sentence(s, drop=(), misc=underlying_misc(pt)))
    _write(args.output, "\n".join(lines) + "\n" if args.bracketed else write_conllu(out))
    return 0


def _paired(a: list, b: list, what: str) -> list:
    by_id = {s.sent_id: s for s in b}
    rows = []
    for s in a:
        if s.sent_id not in by_id:
            raise CliError(f"sentence {s.sent_id} missing from the {what} file", EXIT_INPUT)
        rows.append((s, by_id[s.sent_id]))
    return rows


def cmd_eval_aed(args) -> int:
    rows = _paired(_trees(args.gold), _trees(args.pred), "predicted")
    try:
        edits = sum(slot_distance(p.slots, g.slots) for g, p in rows)
        value = aed([p.slots for _, p in rows], [g.slots for g, _ in rows])
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    slots = sum(len(g.slots) for g, _ in rows)
    _write(args.output, _tsv(("sentences", "slots", "edits", "aed"),
                             [(len(rows), slots, edits, value)]))
    return 0


def cmd_eval_f05(args) -> int:
    gold = _trees(args.gold)
    inputs = {g.sent_id: x for g, x in _paired(gold, _trees(args.input), "input")}
    pred = {g.sent_id: y for g, y in _paired(gold, _trees(args.pred), "predicted")}
    correct_n = proposed = wanted = 0
    try:
        for g in gold:
            x, y = inputs[g.sent_id], pred[g.sent_id]
            sys_e, gold_e = EditSet.between(x.slots, y.slots), EditSet.between(x.slots, g.slots)
            correct_n += len(sys_e & gold_e)
            proposed += len(sys_e)
            wanted += len(gold_e)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    p = correct_n / proposed if proposed else 1.0
    r = correct_n / wanted if wanted else 1.0
    f = f_beta_counts(correct_n, proposed, wanted)
    _write(args.output, _tsv(("proposed", "gold", "correct", "precision", "recall", "f0.5"),
                             [(proposed, wanted, correct_n, p, r, f)]))
    return 0


def _token_corpus(path: str, fmt: str) -> list:
    if fmt == "text":
        return [line.split() for line in _read_text(path).splitlines() if line.strip()]
    return [[t.form for t in s.tokens if t.form != START_MARK] for s in _raw(path)]


def cmd_trigram_ppl(args) -> int:
    train_c = _token_corpus(args.train, args.format)
    eval_c = _token_corpus(args.eval, args.format)
    if not eval_c:
        raise CliError("empty evaluation corpus", EXIT_INPUT)
    value = trigram_ppl(train_c, eval_c, args.lam)
    _write(args.output, _tsv(("train_sentences", "eval_sentences", "lambda", "perplexity"),
                             [(len(train_c), len(eval_c), args.lam, value)]))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key = value file of defaults for this command")
    p.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: available cores)")
    p.add_argument("--start-mark", default=START_MARK,
                   help="sentence-start punctuation symbol the data is prepared with")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    return p


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--lr", type=float, default=d.learning_rate, help="Adam learning rate")
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--per-epoch", type=int, default=d.sentences_per_epoch,
                   help="sentences sampled per epoch")
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--l2", type=float, default=d.l2, help="L2 coefficient on θ")
    p.add_argument("--pr", type=float, default=d.pr, help="unmatched-punctuation penalty")
    p.add_argument("--square-pr", action="store_true", help="square the penalty term")
    p.add_argument("--pr-mode", choices=("posterior", "prior"), default=d.pr_mode)
    p.add_argument("--direction", choices=("l2r", "r2l", "auto"), default=d.direction)
    p.add_argument("--channel", choices=("learned", "identity"), default=d.channel,
                   help="identity trains the attachment-only ablation")


def _add_mbr_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", type=int, default=MbrConfig().samples, help="MBR sample count")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="punctmodel", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=fn)
        return p

    p = add("train", cmd_train, "train a punctuation model")
    p.add_argument("--train", required=True, help="training CoNLL-U")
    p.add_argument("--dev", help="development CoNLL-U")
    p.add_argument("--out", required=True, help="model file; also writes OUT.best and OUT.log.tsv")
    p.add_argument("--unk-threshold", type=int, default=PreprocessConfig().unk_threshold)
    _add_train_flags(p)

    p = add("train-correction", cmd_train_correction, "train a punctuation correction model")
    p.add_argument("--train-esl", required=True, help="errorful CoNLL-U")
    p.add_argument("--train-cesl", required=True, help="corrected CoNLL-U, same sentence ids")
    p.add_argument("--esl-model", required=True)
    p.add_argument("--cesl-model", required=True)
    p.add_argument("--anchor-strength", type=float, default=1.0,
                   help="L2 pull of the channel toward the corrected-text model")
    p.add_argument("--out", required=True)
    _add_train_flags(p)

    p = add("inspect-channel", cmd_inspect_channel, "report learned channel edit probabilities")
    p.add_argument("--model", required=True)
    p.add_argument("--treebank", help="CoNLL-U whose 1-best underlying bigrams are counted")
    p.add_argument("--output", help="TSV path (default stdout)")

    p = add("perplexity", cmd_perplexity, "per-slot perplexity of a treebank")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--no-backoff", action="store_true",
                   help="fail on relations the model has no pair inventory for")

    p = add("restore", cmd_restore, "punctuate unpunctuated trees")
    p.add_argument("--model")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--trivial", action="store_true", help="final mark only, no model")
    p.add_argument("--final-mark", default=".")
    p.add_argument("--no-backoff", action="store_true")
    _add_mbr_flags(p)

    p = add("correct", cmd_correct, "correct the punctuation of trees")
    p.add_argument("--esl-model", required=True, help="model of the errorful text")
    p.add_argument("--model", required=True, help="correction model")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--no-backoff", action="store_true")
    _add_mbr_flags(p)

    p = add("rephrase", cmd_rephrase, "permute dependents and regenerate punctuation")
    p.add_argument("--model")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--method", choices=("full", "half", "base"), default="full")
    p.add_argument("--permutations", help="orderings file: sent_id, head, order per line")
    p.add_argument("--identity", action="store_true", help="keep the original word order")
    p.add_argument("--argmax", action="store_true", help="most likely channel edits, no sampling")
    p.add_argument("--no-backoff", action="store_true")

    p = add("recover", cmd_recover, "1-best underlying punctuation as MISC attributes")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--bracketed", action="store_true", help="print bracketed text instead")
    p.add_argument("--no-backoff", action="store_true")

    p = add("eval-aed", cmd_eval_aed, "average edit distance per slot")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--output")

    p = add("eval-f05", cmd_eval_f05, "F0.5 over slot edits")
    p.add_argument("--input", required=True, help="original (errorful) CoNLL-U")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--output")

    p = add("trigram-ppl", cmd_trigram_ppl, "add-λ trigram perplexity")
    p.add_argument("--train", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--format", choices=("conllu", "text"), default="conllu")
    p.add_argument("--lam", type=float, default=0.001)
    p.add_argument("--output")
    parser.subparsers = sub.choices  # for config-file defaults
    return parser


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _config_defaults(sub: argparse.ArgumentParser, path: str) -> dict:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    out = {}
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        dest = key.strip().lstrip("-").replace("-", "_")
        if not sep or dest not in actions:
            raise CliError(f"{path}:{lineno}: unknown setting {key.strip()!r}", EXIT_INPUT)
        action, value = actions[dest], value.strip()
        try:
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                out[dest] = _parse_bool(value)
            elif action.type is not None:
                out[dest] = action.type(value)
            else:
                out[dest] = value
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: {exc}", EXIT_INPUT) from None
        if action.choices is not None and out[dest] not in action.choices:
            raise CliError(f"{path}:{lineno}: {value!r} not one of {sorted(action.choices)}",
                           EXIT_INPUT)
    return out


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser.subparsers[args.command]
        sub.set_defaults(**_config_defaults(sub, args.config))
        args = parser.parse_args(argv)
    return args


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except CliError as exc:
        print(f"punctmodel: {exc}", file=sys.stderr)
        return exc.code
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    threads = args.threads or os.cpu_count() or 1
    torch.set_num_threads(max(1, threads))
    if args.command == "restore" and not args.trivial and not args.model:
        print("punctmodel: restore needs --model (or --trivial)", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "rephrase" and args.method != "base" and not args.model:
        print("punctmodel: rephrase needs --model unless --method base", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except CliError as exc:
        print(f"punctmodel: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())

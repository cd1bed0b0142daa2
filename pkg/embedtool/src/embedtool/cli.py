"""Console entry points: catalog batch encoding and report encoding."""

import argparse
import json
import sys

from .encoder import DEFAULT_MODEL, EncoderError, get_encoder
from .pipeline import EncodeJob, PipelineError, encode, encode_report


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _catalog_inputs(path: str) -> list[tuple[str, str]]:
    """Technique (id, text) pairs from a catalog JSON array."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            records = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PipelineError(f"{path}: malformed JSON at line {exc.lineno}") from None
    if not isinstance(records, list) or not records:
        raise PipelineError(f"{path}: expected a nonempty JSON array of technique records")
    inputs = []
    for index, record in enumerate(records):
        if not isinstance(record, dict) or not record.get("id"):
            raise PipelineError(f"{path}: record {index} has no 'id'")
        text = " ".join(
            str(record.get(key) or "").strip() for key in ("name", "description")
        ).strip()
        inputs.append((str(record["id"]), text))
    return inputs


def embed_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed",
        description="Encode catalog technique descriptions into embedding JSONL.",
    )
    parser.add_argument("--model", default=DEFAULT_MODEL, help="encoder spec (default hash:256)")
    parser.add_argument("--catalog", required=True, help="technique catalog JSON")
    parser.add_argument("--out", required=True, help="embedding JSONL output")
    parser.add_argument("--batch-size", type=int, default=32, help="texts per encoder call")
    args = parser.parse_args(argv)
    try:
        encoder = get_encoder(args.model)
        job = EncodeJob(
            model_name=args.model,
            inputs=tuple(_catalog_inputs(args.catalog)),
            output_path=args.out,
            batch_size=args.batch_size,
        )
        count = encode(job, encoder)
    except (EncoderError, PipelineError, ValueError) as exc:
        _log(f"error: {exc}")
        return 1
    except OSError as exc:
        _log(f"i/o error: {exc}")
        return 2
    _log(f"embed: {count} vectors of dim {encoder.dim} in {args.out}")
    return 0


def embed_report_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-report",
        description="Encode one report into a reserved context embedding row.",
    )
    parser.add_argument("--model", default=DEFAULT_MODEL, help="encoder spec (default hash:256)")
    parser.add_argument("--in", dest="report", required=True, help="report text file")
    parser.add_argument("--out", required=True, help="embedding JSONL output")
    args = parser.parse_args(argv)
    try:
        encoder = get_encoder(args.model)
        with open(args.report, "r", encoding="utf-8") as fh:
            text = fh.read()
        vector = encode_report(text, args.out, encoder=encoder)
    except (EncoderError, PipelineError, ValueError) as exc:
        _log(f"error: {exc}")
        return 1
    except OSError as exc:
        _log(f"i/o error: {exc}")
        return 2
    _log(f"embed-report: context vector of dim {vector.shape[0]} in {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(embed_main())

"""
Report Generator for EEGScribe
Writes aligned text tables, TSV rows, JSON, HTML and PNG figures.
File names are fixed per stage so reruns overwrite byte-identical output.
"""
import html as html_lib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from kpca import cumulative_explained_variance  # noqa: E402
from metrics import EvalReport  # noqa: E402

logger = logging.getLogger(__name__)

SWEEP_HEADERS = ["Total sentences", "Unique sentences", "Total words", "Unique words", "Letters",
                  "WER % random init + LM", "WER % pretrained init + LM"]
COMPACT_HEADERS = ["Total sentences", "Total words", "WER % random init + LM", "WER % pretrained init + LM"]
PNG_METADATA = {"Software": None}

STYLE = """
        * { margin: 0; padding: 0; box-sizing: border-box; }
        body {
            font-family: -apple-system, BlinkMacSystemFont, 'Segoe UI', Arial, sans-serif;
            line-height: 1.6; color: #1f2937; background: #f9fafb; padding: 20px;
        }
        .container {
            max-width: 1200px; margin: 0 auto; background: white; border-radius: 8px;
            box-shadow: 0 1px 3px rgba(0,0,0,0.1); overflow: hidden;
        }
        .header { background: linear-gradient(135deg, #2563eb 0%, #1e40af 100%); color: white; padding: 30px; }
        .header h1 { font-size: 28px; margin-bottom: 8px; }
        .header p { opacity: 0.9; font-size: 14px; }
        .summary {
            display: grid; grid-template-columns: repeat(auto-fit, minmax(200px, 1fr)); gap: 20px;
            padding: 30px; background: #f9fafb; border-bottom: 1px solid #e5e7eb;
        }
        .stat-card { background: white; padding: 20px; border-radius: 6px; border-left: 4px solid #2563eb; }
        .stat-label { font-size: 12px; color: #6b7280; text-transform: uppercase; font-weight: 600; margin-bottom: 4px; }
        .stat-value { font-size: 32px; font-weight: 700; color: #1f2937; }
        .stat-subtext { font-size: 14px; color: #6b7280; margin-top: 4px; }
        .success { color: #16a34a; }
        .error { color: #dc2626; }
        .warning { color: #ea580c; }
        .content { padding: 30px; }
        h2 { font-size: 20px; margin-bottom: 20px; color: #1f2937; }
        table { border-collapse: collapse; width: 100%; font-size: 13px; margin-bottom: 20px; }
        th, td { border: 1px solid #e5e7eb; padding: 6px 10px; text-align: left; }
        th { background: #f3f4f6; }
        td.mono { font-family: 'Courier New', monospace; }
        .note { color: #6b7280; font-size: 13px; margin-bottom: 8px; }
        .footer {
            padding: 20px 30px; background: #f9fafb; border-top: 1px solid #e5e7eb;
            text-align: center; color: #6b7280; font-size: 13px;
        }
"""


def format_cell(value: Any) -> str:
    if isinstance(value, float):
        if np.isnan(value):
            return "nan"
        return f"{value:.2f}" if abs(value) >= 1 else f"{value:.4f}"
    return str(value)


def format_table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """Aligned-column plain-text table"""
    cells = [[str(h) for h in headers]] + [[format_cell(v) for v in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def format_tsv(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """Machine rows: full-precision reals"""
    def cell(v):
        return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
    return "\n".join(["\t".join(headers)] + ["\t".join(cell(v) for v in row) for row in rows]) + "\n"


def _html_table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    head = "".join(f"<th>{html_lib.escape(str(h))}</th>" for h in headers)
    body = "".join(
        "<tr>" + "".join(f"<td>{html_lib.escape(format_cell(v))}</td>" for v in row) + "</tr>"
        for row in rows
    )
    return f"<table><tr>{head}</tr>{body}</table>"


def _html_page(title: str, subtitle: str, cards: List[Tuple[str, str, str]], body: str) -> str:
    card_html = "".join(
        f"""
            <div class="stat-card">
                <div class="stat-label">{html_lib.escape(label)}</div>
                <div class="stat-value">{html_lib.escape(value)}</div>
                <div class="stat-subtext">{html_lib.escape(sub)}</div>
            </div>"""
        for label, value, sub in cards
    )
    return f"""<!DOCTYPE html>
<html lang="en">
<head>
    <meta charset="UTF-8">
    <meta name="viewport" content="width=device-width, initial-scale=1.0">
    <title>{html_lib.escape(title)}</title>
    <style>{STYLE}    </style>
</head>
<body>
    <div class="container">
        <div class="header">
            <h1>{html_lib.escape(title)}</h1>
            <p>{html_lib.escape(subtitle)}</p>
        </div>
        <div class="summary">{card_html}
        </div>
        <div class="content">
{body}
        </div>
        <div class="footer">
            Generated by EEGScribe
        </div>
    </div>
</body>
</html>
"""


class ReportGenerator:
    """Writes evaluation, sweep, regression and dataset-check reports"""

    def _write(self, path: Path, text: str) -> str:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        return str(path)

    def _write_json(self, path: Path, data: Dict[str, Any]) -> str:
        return self._write(path, json.dumps(data, indent=2, ensure_ascii=False) + "\n")

    def generate_eval_reports(self, report: EvalReport, summary: Dict[str, Any], output_dir,
                              stage: str = "eval") -> Dict[str, str]:
        """
        Text, TSV, JSON and HTML for one decoding run

        Args:
            report: scored transcripts
            summary: run facts shown above the per-utterance table (model, LM, beam ...)
            output_dir: directory for `<stage>_report.<ext>`

        Returns:
            Mapping of extension to written path
        """
        out = Path(output_dir)
        headers = ["id", "WER %", "reference", "hypothesis"]
        rows = [[uid, wer, ref, hyp] for uid, wer, ref, hyp in
                zip(report.utterance_ids, report.per_utterance_wer, report.references, report.hypotheses)]
        facts = dict(summary)
        facts.update({"utterances": report.n_utterances, "corpus_wer": report.corpus_wer,
                      "edits": report.total_edits, "reference_words": report.total_reference_words})

        text = [f"{k}: {format_cell(v)}" for k, v in facts.items()]
        text += [f"note: {n}" for n in report.notes]
        paths = {
            "txt": self._write(out / f"{stage}_report.txt", "\n".join(text) + "\n\n" + format_table(headers, rows)),
            "tsv": self._write(out / f"{stage}_report.tsv", format_tsv(headers, rows)),
            "json": self._write_json(out / f"{stage}_report.json", {
                "summary": facts,
                "notes": report.notes,
                "utterances": [dict(zip(["id", "wer", "reference", "hypothesis"], row)) for row in rows],
            }),
        }
        cards = [("Corpus WER", f"{report.corpus_wer:.2f}%",
                  f"{report.total_edits} edits / {report.total_reference_words} words"),
                 ("Utterances", str(report.n_utterances), str(summary.get("model", "")))]
        notes = "".join(f'<p class="note">{html_lib.escape(n)}</p>' for n in report.notes)
        body = f"<h2>Per-utterance results</h2>{notes}{_html_table(headers, rows)}"
        paths["html"] = self._write(out / f"{stage}_report.html",
                                    _html_page("EEGScribe Decoding Report", stage, cards, body))
        logger.info("Wrote %s reports to %s", stage, out)
        return paths

    def generate_sweep_reports(self, rows: List[Dict[str, Any]], output_dir,
                               notes: Sequence[str] = ()) -> Dict[str, str]:
        """Vocabulary sweep in both the five-count and the two-count table layouts"""
        out = Path(output_dir)
        full_keys = ["total_sentences", "unique_sentences", "total_words", "unique_words", "letters",
                     "wer_random", "wer_pretrained"]
        compact_keys = ["total_sentences", "total_words", "wer_random", "wer_pretrained"]
        full_rows = [[row[k] for k in full_keys] for row in rows]
        compact_rows = [[row[k] for k in compact_keys] for row in rows]
        text = format_table(SWEEP_HEADERS, full_rows) + "\n" + format_table(COMPACT_HEADERS, compact_rows)
        text += "".join(f"note: {n}\n" for n in notes)
        paths = {
            "txt": self._write(out / "sweep_report.txt", text),
            "tsv": self._write(out / "sweep_report.tsv", format_tsv(full_keys, full_rows)),
            "json": self._write_json(out / "sweep_report.json", {"rows": rows, "notes": list(notes)}),
        }
        body = (f"<h2>Vocabulary sweep</h2>{_html_table(SWEEP_HEADERS, full_rows)}"
                f"<h2>Compact layout</h2>{_html_table(COMPACT_HEADERS, compact_rows)}")
        cards = [("Vocabulary sizes", str(len(rows)), ", ".join(str(r["unique_sentences"]) for r in rows))]
        paths["html"] = self._write(out / "sweep_report.html",
                                    _html_page("EEGScribe Vocabulary Sweep", "WER by vocabulary size", cards, body))
        return paths

    def generate_regression_report(self, name: str, names: Sequence[str], rmse_scores, nrmse_scores,
                                   baseline_nrmse, output_dir) -> Dict[str, str]:
        """Per-dimension RMSE / NRMSE with averages and the mean-predictor baseline"""
        out = Path(output_dir)
        headers = ["dimension", "RMSE", "NRMSE", "baseline NRMSE"]
        rows = [[n, float(r), float(q), float(b)] for n, r, q, b in
                zip(names, rmse_scores.per_dimension, nrmse_scores.per_dimension, baseline_nrmse.per_dimension)]
        averages = {"average_rmse": rmse_scores.mean, "average_nrmse": nrmse_scores.mean,
                    "baseline_average_nrmse": baseline_nrmse.mean}
        text = format_table(headers, rows) + "".join(f"{k}: {v:.4f}\n" for k, v in averages.items())
        paths = {
            "txt": self._write(out / f"{name}_report.txt", text),
            "tsv": self._write(out / f"{name}_report.tsv", format_tsv(headers, rows)),
            "json": self._write_json(out / f"{name}_report.json", {**averages, "dimensions": [
                dict(zip(["name", "rmse", "nrmse", "baseline_nrmse"], row)) for row in rows]}),
        }
        return paths

    def write_loss_curve(self, stage: str, losses: Sequence[float], output_dir,
                         ylabel: str = "loss") -> Dict[str, str]:
        """Per-epoch loss series as TSV and PNG"""
        out = Path(output_dir)
        rows = [[i + 1, float(v)] for i, v in enumerate(losses)]
        paths = {"tsv": self._write(out / f"{stage}_loss.tsv", format_tsv(["epoch", ylabel], rows))}

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(np.arange(1, len(losses) + 1), losses, color="#2563eb")
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        ax.set_title(f"{stage} training loss")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        png = out / f"{stage}_loss.png"
        fig.savefig(png, dpi=100, metadata=PNG_METADATA)
        plt.close(fig)
        paths["png"] = str(png)
        return paths

    def write_variance_report(self, eigenvalues: np.ndarray, chosen: int, output_dir) -> Dict[str, str]:
        """Cumulative explained variance table and plot marking the chosen component count"""
        out = Path(output_dir)
        ratios = cumulative_explained_variance(eigenvalues)
        rows = [[i + 1, float(r)] for i, r in enumerate(ratios)]
        paths = {"tsv": self._write(out / "kpca_variance.tsv",
                                    format_tsv(["components", "cumulative_explained_variance"], rows))}

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(np.arange(1, ratios.size + 1), ratios, color="#2563eb")
        if 0 < chosen <= ratios.size:
            ax.axvline(chosen, color="#dc2626", linestyle="--", label=f"{chosen} components "
                       f"({100 * ratios[chosen - 1]:.1f}%)")
            ax.legend(loc="lower right")
        ax.set_xlabel("number of components")
        ax.set_ylabel("cumulative explained variance")
        ax.set_ylim(0, 1.02)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        png = out / "kpca_variance.png"
        fig.savefig(png, dpi=100, metadata=PNG_METADATA)
        plt.close(fig)
        paths["png"] = str(png)
        return paths

    def generate_check_reports(self, check: Dict[str, Any], manifest_summary: Dict[str, Any],
                               output_dir) -> Tuple[str, str]:
        """
        HTML and JSON for a dataset check

        Returns:
            Tuple of (html_file_path, json_file_path)
        """
        out = Path(output_dir)
        json_file = self._write_json(out / "check_report.json", {
            "manifest": {k: v for k, v in manifest_summary.items() if k != "records"},
            "check": check,
        })
        score = check['quality_score']
        cards = [
            ("Utterances", str(manifest_summary.get('record_count', 0)),
             f"{len(manifest_summary.get('subjects', {}))} subjects"),
            ("Check Score", f"{score:.1f}%", f"{check['checks_passed']}/{check['checks_performed']} passed"),
            ("Total Issues", str(check['total_issues']),
             f"{check['errors']} errors · {check['warnings']} warnings"),
        ]
        rows = [[i['severity'], i['category'], i['utterance_id'] or "", i['description']] for i in check['issues']]
        body = f"<h2>Issues</h2>{_html_table(['severity', 'category', 'utterance', 'description'], rows)}"
        html_file = self._write(out / "check_report.html",
                                _html_page("EEGScribe Dataset Check", manifest_summary.get('file_name', ''),
                                           cards, body))
        return html_file, json_file

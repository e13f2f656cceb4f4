"""Merge every summary.csv under a results tree into one report.

Usage:
  python scripts/export_summary_report.py tables --out summary_report.csv
"""
import argparse
import csv
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from acmh_sampler.utils.run_io import SUMMARY_FIELDS, read_summary_csv  # noqa: E402

FIELDS = ['experiment'] + SUMMARY_FIELDS + ['notes']


def main() -> int:
    p = argparse.ArgumentParser(description='Merge summary.csv files')
    p.add_argument('root', help='Results directory')
    p.add_argument('--out', '-o', default='summary_report.csv')
    p.add_argument('--mean-only', action='store_true', help='Keep only the mean rows')
    args = p.parse_args()

    root = Path(args.root)
    paths = sorted(root.rglob('summary.csv'))
    if not paths:
        print(f'No summary.csv under {root}')
        return 1
    with Path(args.out).open('w', newline='', encoding='utf-8') as fh:
        writer = csv.DictWriter(fh, fieldnames=FIELDS)
        writer.writeheader()
        for path in paths:
            experiment = str(path.parent.parent.relative_to(root))
            for row in read_summary_csv(path):
                if args.mean_only and row.get('replication') != 'mean':
                    continue
                notes = []
                if not row.get('lpds'):
                    notes.append('no exact sampler')
                if not row.get('iact_avg'):
                    notes.append('iact unavailable')
                writer.writerow({'experiment': experiment, **{k: row.get(k, '') for k in SUMMARY_FIELDS},
                                 'notes': '; '.join(notes) if notes else 'ok'})
    print(f'Saved report to: {args.out} ({len(paths)} summaries)')
    return 0


if __name__ == '__main__':
    sys.exit(main())

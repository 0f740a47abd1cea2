#!/usr/bin/env python3
"""
Experiment Report Generator
Write stored experiment reports as CSV and PDF summaries.
"""

from datetime import datetime
from pathlib import Path
from typing import Iterable, List, Optional

import pandas as pd
from loguru import logger

import config
from run_log_db import RunLogDB

# PDF generation imports
try:
    from reportlab.lib import colors
    from reportlab.lib.enums import TA_CENTER
    from reportlab.lib.pagesizes import A4, landscape
    from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
    from reportlab.lib.units import inch
    from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle
    PDF_AVAILABLE = True
except ImportError:
    PDF_AVAILABLE = False
    logger.warning("reportlab not installed. PDF generation will not be available.")

SUMMARY_COLUMNS = ["run_id", "experiment", "lhs", "rhs", "abs_gap", "rel_gap", "stderr",
                   "skip_fraction", "passed"]


class ReportGenerator:
    """Generate experiment summaries in various formats"""

    def __init__(self, output_dir=None, db: Optional[RunLogDB] = None):
        """
        Initialize report generator

        Args:
            output_dir: Directory to save reports (default: REPORTS_DIR)
            db: run log to read stored experiments from
        """
        self.db = db or RunLogDB()
        self.output_dir = Path(output_dir or config.REPORTS_DIR)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        logger.debug(f"Report Generator initialized. Output directory: {self.output_dir}")

    def _resolve(self, filename: str) -> Path:
        path = Path(filename)
        return path if path.is_absolute() or path.parent != Path(".") else self.output_dir / path

    def write_rows_csv(self, rows: Iterable[dict], filename: str) -> Path:
        """
        Flat experiment rows (ExperimentReport.to_rows) as CSV

        Args:
            rows: row dicts
            filename: output path; bare names go to the output directory

        Returns:
            Path to the CSV file
        """
        try:
            path = self._resolve(filename)
            path.parent.mkdir(parents=True, exist_ok=True)
            pd.DataFrame(list(rows)).to_csv(path, index=False)
            logger.info(f"Rows CSV generated: {path}")
            return path
        except Exception as e:
            logger.error(f"Error writing rows CSV: {e}")
            raise

    def generate_csv_report(self, filename: Optional[str] = None, run_id: Optional[int] = None) -> List[str]:
        """
        CSV reports of stored experiments: a summary file and a per-experiment pass table

        Args:
            filename: Base filename (default: experiment_report_YYYYMMDD_HHMMSS)
            run_id: restrict to one run

        Returns:
            list: Paths to generated reports
        """
        try:
            if filename is None:
                timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
                base_filename = f'experiment_report_{timestamp}'
            else:
                base_filename = filename.replace('.csv', '')

            logger.info(f"Generating CSV reports: {base_filename}")
            reports = self.db.get_experiment_reports(run_id)
            generated_files = []

            detail_file = self.output_dir / f'{base_filename}_experiments.csv'
            columns = [c for c in SUMMARY_COLUMNS + ["seed", "config_hash", "created_at"] if c in reports.columns]
            reports[columns].to_csv(detail_file, index=False)
            generated_files.append(str(detail_file))

            summary_file = self.output_dir / f'{base_filename}_summary.csv'
            if reports.empty:
                summary = pd.DataFrame(columns=["experiment", "runs", "passed", "pass_rate", "max_rel_gap"])
            else:
                summary = (reports.groupby("experiment")
                           .agg(runs=("passed", "size"), passed=("passed", "sum"),
                                pass_rate=("passed", "mean"), max_rel_gap=("rel_gap", "max"))
                           .reset_index())
            summary.to_csv(summary_file, index=False)
            generated_files.append(str(summary_file))

            logger.info(f"CSV reports generated: {generated_files}")
            return generated_files
        except Exception as e:
            logger.error(f"Error generating CSV report: {e}")
            raise

    def generate_pdf_report(self, filename: Optional[str] = None, run_id: Optional[int] = None) -> str:
        """
        PDF table of stored experiments

        Args:
            filename: Output filename (default: experiment_report_YYYYMMDD_HHMMSS.pdf)
            run_id: restrict to one run

        Returns:
            str: Path to generated report
        """
        if not PDF_AVAILABLE:
            raise ImportError("reportlab is not installed. Install it with: pip install reportlab")

        try:
            if filename is None:
                timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
                filename = f'experiment_report_{timestamp}.pdf'
            filepath = self._resolve(filename)
            logger.info(f"Generating PDF report: {filepath}")

            doc = SimpleDocTemplate(str(filepath), pagesize=landscape(A4),
                                    rightMargin=36, leftMargin=36, topMargin=36, bottomMargin=18)
            styles = getSampleStyleSheet()
            title_style = ParagraphStyle('ReportTitle', parent=styles['Heading1'], fontSize=20,
                                         textColor=colors.HexColor('#1f4788'), spaceAfter=20,
                                         alignment=TA_CENTER)
            elements = [
                Paragraph("Verification Experiments", title_style),
                Paragraph(f"Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}", styles['Normal']),
                Spacer(1, 0.2 * inch),
            ]

            reports = self.db.get_experiment_reports(run_id)
            table_data = [['Run', 'Experiment', 'LHS', 'RHS', 'Rel. gap', 'Std. err', 'Skipped', 'Result']]
            for _, row in reports.iterrows():
                table_data.append([
                    str(int(row['run_id'])),
                    str(row['experiment']),
                    f"{row['lhs']:.6g}",
                    f"{row['rhs']:.6g}",
                    f"{row['rel_gap']:.2e}",
                    f"{row['stderr']:.2e}" if pd.notna(row['stderr']) else 'N/A',
                    f"{row['skip_fraction']:.1%}",
                    'PASS' if row['passed'] else 'FAIL',
                ])

            table = Table(table_data, repeatRows=1)
            table.setStyle(TableStyle([
                ('BACKGROUND', (0, 0), (-1, 0), colors.grey),
                ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
                ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
                ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
                ('FONTSIZE', (0, 0), (-1, 0), 10),
                ('FONTSIZE', (0, 1), (-1, -1), 8),
                ('BOTTOMPADDING', (0, 0), (-1, 0), 10),
                ('BACKGROUND', (0, 1), (-1, -1), colors.beige),
                ('GRID', (0, 0), (-1, -1), 1, colors.black)
            ]))
            elements.append(table)
            doc.build(elements)

            logger.info(f"PDF report generated successfully: {filepath}")
            return str(filepath)
        except Exception as e:
            logger.error(f"Error generating PDF report: {e}")
            raise

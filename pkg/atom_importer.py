"""
Atom Importer Module
Import signed atomic measures from JSON or CSV files
"""
import json
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from loguru import logger

import config
from errors import ConfigError, InvalidParameterError
from jacobian_core import unit_ball_volume
from measures import AtomicMeasure


class AtomImporter:
    """Import atoms (location, sign) from JSON/CSV files"""

    def __init__(self, dimension: int = 2, strict: bool = True):
        """
        Initialize atom importer

        Args:
            dimension: coordinate count of every atom
            strict: raise on a malformed row instead of skipping it
        """
        self.dimension = dimension
        self.strict = strict
        config.setup_logging()

    def load(self, file_path: str, scale: Optional[float] = None) -> AtomicMeasure:
        """Dispatch on the file suffix (.json or .csv)"""
        suffix = Path(file_path).suffix.lower()
        if suffix == ".json":
            return self.import_from_json(file_path, scale)
        if suffix == ".csv":
            return self.import_from_csv(file_path, scale)
        raise ConfigError(f"Unsupported atom file type '{suffix}' for {file_path}", key="atoms")

    def import_from_json(self, file_path: str, scale: Optional[float] = None) -> AtomicMeasure:
        """
        Import atoms from JSON

        Accepts the AtomicMeasure.to_dict() layout ``{"scale", "atoms": [{"x", "sign"}]}``
        or a bare list of atom records.

        Args:
            file_path: Path to JSON file
            scale: overrides the stored scale

        Returns:
            AtomicMeasure
        """
        try:
            logger.info(f"Reading atom JSON: {file_path}")
            with open(file_path) as fh:
                data = json.load(fh)
            if isinstance(data, dict):
                records = data.get("atoms", [])
                scale = data.get("scale") if scale is None else scale
            else:
                records = data
            df = pd.DataFrame([{"x": r.get("x"), "sign": r.get("sign")} for r in records],
                              columns=["x", "sign"])
            if len(df):
                coords = pd.DataFrame(df["x"].tolist(), columns=self._coordinate_columns())
                df = pd.concat([coords, df[["sign"]]], axis=1)
            return self._import_dataframe(df, scale, source="JSON")
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Error importing atoms from JSON: {e}")
            raise ConfigError(f"Cannot read atoms from {file_path}: {e}", key="atoms")

    def import_from_csv(self, file_path: str, scale: Optional[float] = None) -> AtomicMeasure:
        """
        Import atoms from CSV with coordinate columns and a sign column

        Args:
            file_path: Path to CSV file
            scale: atom mass (default ω_n)

        Returns:
            AtomicMeasure
        """
        try:
            logger.info(f"Reading atom CSV: {file_path}")
            df = pd.read_csv(file_path)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            logger.error(f"Error importing atoms from CSV: {e}")
            raise ConfigError(f"Cannot read atoms from {file_path}: {e}", key="atoms")
        return self._import_dataframe(df, scale, source="CSV")

    def _coordinate_columns(self):
        return [f"x{i + 1}" for i in range(self.dimension)]

    def _normalize_columns(self, df: pd.DataFrame) -> pd.DataFrame:
        """Map common column spellings to x1..xn and sign"""
        column_mapping = {
            "x": "x1",
            "y": "x2",
            "z": "x3",
            "sigma": "sign",
            "orientation": "sign",
            "charge": "sign",
            "multiplicity": "sign",
        }
        df = df.copy()
        df.columns = df.columns.astype(str).str.lower().str.strip()
        return df.rename(columns=column_mapping)

    def _validate_dataframe(self, df: pd.DataFrame) -> bool:
        required = self._coordinate_columns() + ["sign"]
        missing = [col for col in required if col not in df.columns]
        if missing:
            logger.error(f"Missing required columns: {missing}; available: {df.columns.tolist()}")
            raise ConfigError(f"Missing required atom columns: {missing}", key=missing[0])
        return True

    @staticmethod
    def _parse_sign(value) -> int:
        """+1/-1 from numbers or '+', '-', 'pos', 'neg'"""
        text = str(value).strip().lower()
        if text in ("+", "pos", "positive", "+1", "1", "1.0"):
            return 1
        if text in ("-", "neg", "negative", "-1", "-1.0"):
            return -1
        raise InvalidParameterError(f"Invalid atom sign {value!r}")

    def _import_dataframe(self, df: pd.DataFrame, scale: Optional[float], source: str) -> AtomicMeasure:
        scale = unit_ball_volume(self.dimension) if scale is None else float(scale)
        if df.empty:
            logger.info(f"No atoms in {source} input")
            return AtomicMeasure.empty(self.dimension, scale)
        df = self._normalize_columns(df)
        self._validate_dataframe(df)

        locations, signs = [], []
        failed = 0
        for idx, row in df.iterrows():
            try:
                loc = [float(row[c]) for c in self._coordinate_columns()]
                if not np.all(np.isfinite(loc)):
                    raise InvalidParameterError(f"non-finite coordinates {loc}")
                sign = self._parse_sign(row["sign"])
            except (InvalidParameterError, ValueError, TypeError) as e:
                if self.strict:
                    logger.error(f"Row {idx}: {e}")
                    raise InvalidParameterError(f"Malformed atom in row {idx}: {e}")
                logger.warning(f"Row {idx}: {e}, skipping")
                failed += 1
                continue
            locations.append(loc)
            signs.append(sign)

        logger.info(f"Atom import complete: {len(signs)} atoms, {failed} skipped")
        return AtomicMeasure(np.array(locations, dtype=float).reshape(-1, self.dimension),
                             np.array(signs, dtype=float), scale)

    def create_sample_template(self, output_path: str = "atoms_template.csv") -> Path:
        """Write a CSV template with one dipole"""
        df = pd.DataFrame({"x1": [0.3, 0.7], "x2": [0.5, 0.5], "sign": [1, -1]})
        df.to_csv(output_path, index=False)
        logger.info(f"Atom template written: {output_path}")
        return Path(output_path)

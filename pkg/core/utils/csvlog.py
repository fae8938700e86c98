"""Append-only CSV logs with a fixed column order"""
import csv
from pathlib import Path


def format_value(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


class CsvLog:
    """
    Context manager writing one header row and then one row per record.

    Missing keys are written as empty cells; unknown keys are an error.
    """

    def __init__(self, path, columns):
        self.path = Path(path)
        self.columns = list(columns)
        self.rows_written = 0
        self._handle = None
        self._writer = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, 'w', newline='', encoding='utf-8')
        self._writer = csv.writer(self._handle, lineterminator='\n')
        self._writer.writerow(self.columns)
        return self

    def write(self, record):
        unknown = set(record) - set(self.columns)
        if unknown:
            raise KeyError(f"Unknown CSV columns: {sorted(unknown)}")
        self._writer.writerow([format_value(record.get(column)) for column in self.columns])
        self.rows_written += 1

    def __exit__(self, exc_type, exc, tb):
        self._handle.close()
        self._handle = None
        return False


def write_rows(path, columns, records):
    with CsvLog(path, columns) as log:
        for record in records:
            log.write(record)
    return Path(path)


def read_rows(path):
    with open(path, newline='', encoding='utf-8') as handle:
        return list(csv.DictReader(handle))

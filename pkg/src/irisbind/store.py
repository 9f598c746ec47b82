"""On-disk enrollment store: one directory per identity plus ``index.json``."""
import json
import re
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from .encoding import read_template, write_template
from .errors import LookupFailure, ParameterError
from .keybind import read_commitment, write_commitment

INDEX_NAME = "index.json"
_LABEL = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]{0,127}$")


@dataclass
class EnrollmentRecord:
    identity: str
    template: str
    commitment: str = None
    created: str = ""


class EnrollmentStore:
    """Paths inside records are relative to the store root."""

    def __init__(self, root):
        self.root = Path(root)

    @property
    def index_path(self):
        return self.root / INDEX_NAME

    def exists(self):
        return self.index_path.is_file()

    def init(self):
        self.root.mkdir(parents=True, exist_ok=True)
        if not self.exists():
            self._save({})
        return self

    def _load(self):
        if not self.exists():
            raise ParameterError(f"{self.root} is not an initialized store (missing {INDEX_NAME})")
        data = json.loads(self.index_path.read_text())
        return {label: [EnrollmentRecord(**r) for r in recs]
                for label, recs in data.get("identities", {}).items()}

    def _save(self, index):
        payload = {"identities": {label: [asdict(r) for r in recs]
                                  for label, recs in sorted(index.items())}}
        tmp = self.index_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        tmp.replace(self.index_path)

    def identities(self):
        return sorted(self._load())

    def records(self, identity):
        index = self._load()
        if identity not in index:
            raise LookupFailure(f"unknown identity {identity!r}")
        return index[identity]

    def add(self, identity, template, commitment=None, created=None):
        if not _LABEL.match(identity):
            raise ParameterError(f"identity label {identity!r} is not a safe name")
        index = self._load()
        recs = index.setdefault(identity, [])
        folder = self.root / identity
        folder.mkdir(exist_ok=True)
        n = len(recs)
        rel_t = f"{identity}/sample_{n:03d}.irt"
        write_template(self.root / rel_t, template)
        rel_c = None
        if commitment is not None:
            rel_c = f"{identity}/sample_{n:03d}.irc"
            write_commitment(self.root / rel_c, commitment)
        if created is None:
            created = datetime.now(timezone.utc).isoformat(timespec="seconds")
        rec = EnrollmentRecord(identity, rel_t, rel_c, created)
        recs.append(rec)
        self._save(index)
        return rec

    def load_template(self, record):
        return read_template(self.root / record.template)

    def load_commitment(self, record):
        return None if record.commitment is None else read_commitment(self.root / record.commitment)

    def all_templates(self):
        """``(labels, templates)`` over every enrolled sample."""
        labels, templates = [], []
        for identity, recs in sorted(self._load().items()):
            for r in recs:
                labels.append(identity)
                templates.append(self.load_template(r))
        return labels, templates

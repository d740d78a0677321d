"""Phone classification: onset classes and vowel heights.

The built-in inventory covers the MFA US-English phone set used for forced
alignment, in both IPA and ARPAbet spellings. Labels outside the inventory
classify as ``OnsetClass.OTHER`` / non-vowel rather than raising.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class OnsetClass(Enum):
    VOICED_OBSTRUENT = "voiced_obstruent"
    VOICELESS_OBSTRUENT = "voiceless_obstruent"
    SONORANT = "sonorant"
    OTHER = "other"


class VowelHeight(Enum):
    HIGH = "high"
    MID = "mid"
    LOW = "low"


@dataclass(frozen=True)
class VowelInfo:
    is_vowel: bool
    height: VowelHeight | None = None

    def __post_init__(self):
        if self.is_vowel and self.height is None:
            raise ValueError("vowel requires a height")
        if not self.is_vowel and self.height is not None:
            raise ValueError("non-vowel cannot carry a height")


NOT_A_VOWEL = VowelInfo(False)

# Consonant inventory by onset class.
_VOICED_OBSTRUENTS = ("b", "d", "g", "dʒ", "ʒ", "v", "ð", "z")
_VOICELESS_OBSTRUENTS = (
    "p", "t", "k", "tʃ", "f", "θ", "s", "ʃ", "h", "pʰ", "tʰ", "kʰ", "c", "ç",
)
_SONORANTS = ("m", "n", "ŋ", "ɲ", "l", "j", "w", "mʲ", "n̩")

# Monophthong vowels with height. Heights for vowels the source material
# leaves implicit (ɔ, ʊ, ...) follow the IPA chart; ə is treated as mid
# central. Override via a user table if a different mapping is needed.
_VOWEL_HEIGHTS = {
    "i": VowelHeight.HIGH,
    "iː": VowelHeight.HIGH,
    "ɪ": VowelHeight.HIGH,
    "u": VowelHeight.HIGH,
    "ʊ": VowelHeight.HIGH,
    "ɛ": VowelHeight.MID,
    "ə": VowelHeight.MID,
    "ɔ": VowelHeight.MID,
    "æ": VowelHeight.LOW,
    "ɑ": VowelHeight.LOW,
    "ɑː": VowelHeight.LOW,
    "ɒ": VowelHeight.LOW,
}

# Alternate spellings mapped onto canonical inventory labels. ARPAbet stress
# digits are stripped before lookup, so IY1 hits the IY alias.
_ALIASES = {
    # ARPAbet consonants
    "B": "b", "D": "d", "G": "g", "JH": "dʒ", "ZH": "ʒ", "V": "v",
    "DH": "ð", "Z": "z",
    "P": "p", "T": "t", "K": "k", "CH": "tʃ", "F": "f", "TH": "θ",
    "S": "s", "SH": "ʃ", "HH": "h",
    "M": "m", "N": "n", "NG": "ŋ", "L": "l", "Y": "j", "W": "w",
    # ARPAbet monophthongs
    "IY": "i", "IH": "ɪ", "UW": "u", "UH": "ʊ",
    "EH": "ɛ", "AH": "ə", "AO": "ɔ",
    "AE": "æ", "AA": "ɑ",
    # Unicode / typographic variants
    "ɡ": "g",        # U+0261 script g
    "i:": "iː",      # ASCII colon length marks
    "ɑ:": "ɑː",
    "tʂ": "tʃ",
}


class SegmentInventory:
    """Lookup tables classifying phone labels.

    Classification is total: unknown labels map to OTHER / non-vowel.
    Instances are immutable after construction and safe to share.
    """

    def __init__(
        self,
        consonants: dict[str, OnsetClass],
        vowels: dict[str, VowelHeight],
        aliases: dict[str, str] | None = None,
    ):
        overlap = set(consonants) & set(vowels)
        if overlap:
            raise ValueError(f"labels in both consonant and vowel tables: {sorted(overlap)}")
        self._consonants = dict(consonants)
        self._vowels = dict(vowels)
        self._aliases = dict(aliases or {})

    def normalize(self, label: str) -> str:
        """Map a raw label to its canonical inventory spelling."""
        label = label.strip()
        if label in self._consonants or label in self._vowels:
            return label
        if label in self._aliases:
            return self._aliases[label]
        # ARPAbet vowels carry stress digits (IY0, AH1, ...)
        stripped = label.rstrip("012")
        if stripped != label and stripped in self._aliases:
            return self._aliases[stripped]
        return label

    def classify_onset(self, label: str) -> OnsetClass:
        return self._consonants.get(self.normalize(label), OnsetClass.OTHER)

    def classify_vowel(self, label: str) -> VowelInfo:
        height = self._vowels.get(self.normalize(label))
        if height is None:
            return NOT_A_VOWEL
        return VowelInfo(True, height)

    def is_known(self, label: str) -> bool:
        norm = self.normalize(label)
        return norm in self._consonants or norm in self._vowels

    @property
    def consonant_labels(self) -> tuple[str, ...]:
        return tuple(self._consonants)

    @property
    def vowel_labels(self) -> tuple[str, ...]:
        return tuple(self._vowels)

    def consonants_of_class(self, cls: OnsetClass) -> tuple[str, ...]:
        return tuple(lbl for lbl, c in self._consonants.items() if c is cls)


def _default_inventory() -> SegmentInventory:
    consonants: dict[str, OnsetClass] = {}
    for lbl in _VOICED_OBSTRUENTS:
        consonants[lbl] = OnsetClass.VOICED_OBSTRUENT
    for lbl in _VOICELESS_OBSTRUENTS:
        consonants[lbl] = OnsetClass.VOICELESS_OBSTRUENT
    for lbl in _SONORANTS:
        consonants[lbl] = OnsetClass.SONORANT
    return SegmentInventory(consonants, dict(_VOWEL_HEIGHTS), dict(_ALIASES))


DEFAULT_INVENTORY = _default_inventory()


def classify_onset(label: str) -> OnsetClass:
    """Classify a phone label into an onset class (total function)."""
    return DEFAULT_INVENTORY.classify_onset(label)


def classify_vowel(label: str) -> VowelInfo:
    """Classify a phone label as a target vowel with height, or non-vowel."""
    return DEFAULT_INVENTORY.classify_vowel(label)


_CLASS_NAMES = {
    "voiced_obstruent": OnsetClass.VOICED_OBSTRUENT,
    "voiceless_obstruent": OnsetClass.VOICELESS_OBSTRUENT,
    "sonorant": OnsetClass.SONORANT,
    "vowel": None,
}
_HEIGHT_NAMES = {"high": VowelHeight.HIGH, "mid": VowelHeight.MID, "low": VowelHeight.LOW}


def load_inventory(text: str, extend: bool = True) -> SegmentInventory:
    """Build an inventory from an override table.

    Rows are ``label<TAB>class[<TAB>height]`` where class is one of
    voiced_obstruent, voiceless_obstruent, sonorant, vowel; vowels require a
    height column (high/mid/low). With ``extend`` the rows are overlaid on the
    built-in table, otherwise they replace it.
    """
    consonants: dict[str, OnsetClass] = {}
    vowels: dict[str, VowelHeight] = {}
    aliases: dict[str, str] = {}
    if extend:
        consonants.update(DEFAULT_INVENTORY._consonants)
        vowels.update(DEFAULT_INVENTORY._vowels)
        aliases.update(DEFAULT_INVENTORY._aliases)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.replace(",", "\t").split("\t") if f.strip()]
        if len(fields) < 2:
            raise ValueError(f"inventory line {lineno}: expected 'label class [height]'")
        label, cls_name = fields[0], fields[1].lower()
        if cls_name not in _CLASS_NAMES:
            raise ValueError(f"inventory line {lineno}: unknown class {cls_name!r}")
        if cls_name == "vowel":
            if len(fields) < 3 or fields[2].lower() not in _HEIGHT_NAMES:
                raise ValueError(f"inventory line {lineno}: vowel needs height high/mid/low")
            vowels[label] = _HEIGHT_NAMES[fields[2].lower()]
            consonants.pop(label, None)
        else:
            consonants[label] = _CLASS_NAMES[cls_name]
            vowels.pop(label, None)
    return SegmentInventory(consonants, vowels, aliases)

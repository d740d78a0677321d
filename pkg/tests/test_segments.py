"""Phone inventory classification."""
from __future__ import annotations

import pytest

from cf0probe.segments import (
    DEFAULT_INVENTORY,
    OnsetClass,
    VowelHeight,
    VowelInfo,
    classify_onset,
    classify_vowel,
    load_inventory,
)


def test_examples_from_each_class():
    assert classify_onset("b") is OnsetClass.VOICED_OBSTRUENT
    assert classify_onset("h") is OnsetClass.VOICELESS_OBSTRUENT
    assert classify_onset("m") is OnsetClass.SONORANT


def test_aspirated_stops_are_voiceless():
    for label in ("pʰ", "tʰ", "kʰ"):
        assert classify_onset(label) is OnsetClass.VOICELESS_OBSTRUENT


def test_approximants_are_sonorants():
    for label in ("l", "j", "w"):
        assert classify_onset(label) is OnsetClass.SONORANT


def test_unknown_is_other():
    assert classify_onset("ɹ") is OnsetClass.OTHER
    assert classify_onset("xyzzy") is OnsetClass.OTHER
    assert classify_onset("") is OnsetClass.OTHER


def test_vowel_heights():
    assert classify_vowel("i") == VowelInfo(True, VowelHeight.HIGH)
    assert classify_vowel("ɑ") == VowelInfo(True, VowelHeight.LOW)
    assert classify_vowel("ə") == VowelInfo(True, VowelHeight.MID)
    assert not classify_vowel("t").is_vowel
    assert classify_vowel("t").height is None


def test_inventory_counts():
    inv = DEFAULT_INVENTORY
    by_class = {
        OnsetClass.VOICED_OBSTRUENT: 0,
        OnsetClass.VOICELESS_OBSTRUENT: 0,
        OnsetClass.SONORANT: 0,
    }
    for label in inv.consonant_labels:
        by_class[inv.classify_onset(label)] += 1
    assert by_class[OnsetClass.VOICED_OBSTRUENT] == 8
    assert by_class[OnsetClass.VOICELESS_OBSTRUENT] == 14
    assert by_class[OnsetClass.SONORANT] == 9
    assert len(inv.vowel_labels) == 12


def test_partition_no_label_both_vowel_and_consonant():
    inv = DEFAULT_INVENTORY
    for label in inv.consonant_labels:
        assert not inv.classify_vowel(label).is_vowel
    for label in inv.vowel_labels:
        assert inv.classify_onset(label) is OnsetClass.OTHER


def test_arpabet_aliases_match_ipa():
    pairs = [
        ("B", "b"), ("JH", "dʒ"), ("DH", "ð"),
        ("CH", "tʃ"), ("SH", "ʃ"), ("HH", "h"),
        ("NG", "ŋ"), ("Y", "j"),
        ("IY", "i"), ("AE", "æ"), ("AO", "ɔ"), ("UH", "ʊ"),
    ]
    for arpa, ipa in pairs:
        assert classify_onset(arpa) is classify_onset(ipa)
        assert classify_vowel(arpa) == classify_vowel(ipa)


def test_stress_digits_stripped():
    assert classify_vowel("IY1") == classify_vowel("i")
    assert classify_vowel("AH0") == classify_vowel("ə")


def test_diphthongs_not_target_vowels():
    for label in ("aɪ", "aʊ", "ɔɪ", "eɪ", "oʊ", "EY", "AY", "OW"):
        assert not classify_vowel(label).is_vowel


def test_override_table():
    inv = load_inventory("ɹ\tsonorant\npelícula\tvowel\thigh\n")
    assert inv.classify_onset("ɹ") is OnsetClass.SONORANT
    assert inv.classify_vowel("película").height is VowelHeight.HIGH
    # built-ins still present when extending
    assert inv.classify_onset("b") is OnsetClass.VOICED_OBSTRUENT


def test_override_rejects_bad_rows():
    with pytest.raises(ValueError):
        load_inventory("x\tvowel\n")  # missing height
    with pytest.raises(ValueError):
        load_inventory("x\tnasal\n")  # unknown class

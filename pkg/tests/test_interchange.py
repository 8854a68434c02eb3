from __future__ import annotations

import json
from pathlib import Path

import pytest

from docbench.corpus import DocumentKey, GroundTruthPage, PageKey
from docbench.errors import (ConfigError, CsvParseError, JsonParseError,
                             PathTypeError, XmlParseError)
from docbench.interchange import (LOSSY_DECODE, SELECTOR_MISS, AdapterConfig,
                                  ExtractionRecord, load_adapter_config,
                                  parse_json_extraction, parse_plaintext,
                                  parse_table_csv, parse_xml_extraction,
                                  read_records_jsonl, restrict_to_ground_truth,
                                  restrict_units, save_adapter_config,
                                  tokenize, write_records_jsonl)
from docbench.metrics import MatchConfig

from oracles import ratio_reference

KEY = PageKey("1401.0001", 0)


def _gt_page(tokens_by_label: dict[str, list[str]]) -> GroundTruthPage:
    from docbench.corpus import GroundTruthToken
    tokens = tuple(
        GroundTruthToken(text, 0, 0, 1, 1, 0, 0, 0, "f", label)
        for label, texts in tokens_by_label.items()
        for text in texts)
    return GroundTruthPage(KEY, tokens)


def test_tokenize_unicode_whitespace():
    assert tokenize("a  b\tc\nd") == ("a", "b", "c", "d")
    assert tokenize("  leading trailing  ") == ("leading", "trailing")
    assert tokenize("non breaking") == ("non", "breaking")
    assert tokenize("") == ()
    assert tokenize("   ") == ()


def test_record_tokens_flatten_units():
    record = ExtractionRecord("t", KEY, "table", (("a", "b"), ("c",)))
    assert record.tokens == ("a", "b", "c")
    empty = ExtractionRecord("t", KEY, "table", ())
    assert empty.tokens == ()


def test_adapter_config_validation():
    AdapterConfig("mytool", "xml", {"title": "docTitle"})
    with pytest.raises(ConfigError):
        AdapterConfig("", "xml")
    with pytest.raises(ConfigError):
        AdapterConfig("t", "yaml")
    with pytest.raises(ConfigError):
        AdapterConfig("t", "xml", scope="paragraph")
    with pytest.raises(ConfigError):
        AdapterConfig("t", "xml", {"Title": "x"})
    with pytest.raises(ConfigError):
        AdapterConfig("t", "csv", {"title": "x"})
    AdapterConfig("t", "csv", {"table": ""})
    with pytest.raises(ConfigError):
        AdapterConfig("t", "xml", {"title": "head", "section": "head"})


def test_effective_path_template():
    assert AdapterConfig("t", "xml").effective_path_template == "{doc}_{page}.xml"
    assert AdapterConfig("t", "json").effective_path_template == "{doc}_{page}.json"
    doc_scope = AdapterConfig("t", "text", scope="document")
    assert doc_scope.effective_path_template == "{doc}.txt"
    custom = AdapterConfig("t", "xml", path_template="out/{doc}/p{page}.xml")
    assert custom.effective_path_template == "out/{doc}/p{page}.xml"


def test_adapter_config_json_round_trip(tmp_path: Path):
    config = AdapterConfig("mytool", "json", {"title": "meta.title"},
                           scope="document", path_template="{doc}.json")
    path = tmp_path / "adapter.json"
    save_adapter_config(config, path)
    loaded = load_adapter_config(path)
    assert loaded == config
    payload = json.loads(path.read_text(encoding="utf-8"))
    assert payload["format_version"] == 1


def test_adapter_config_load_errors(tmp_path: Path):
    path = tmp_path / "adapter.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_adapter_config(path)
    path.write_text('{"format_version": 9, "tool": "t", "format": "xml"}',
                    encoding="utf-8")
    with pytest.raises(ConfigError):
        load_adapter_config(path)
    path.write_text('{"tool": "t"}', encoding="utf-8")
    with pytest.raises(ConfigError):
        load_adapter_config(path)


TEI_LIKE = """<TEI xmlns="http://example.org/ns">
  <teiHeader>
    <titleStmt><title>Deep Parsing</title></titleStmt>
  </teiHeader>
  <text>
    <body>
      <p>First <hi>body</hi> paragraph.</p>
      <p>Second paragraph here.</p>
      <listBibl>
        <biblStruct><note>Smith 2019 Parsing</note></biblStruct>
        <biblStruct><note>Jones 2020 Trees</note></biblStruct>
      </listBibl>
    </body>
  </text>
</TEI>
"""


def test_xml_adapter_namespace_ignoring(tmp_path: Path):
    path = tmp_path / "1401.0001_0.xml"
    path.write_text(TEI_LIKE, encoding="utf-8")
    config = AdapterConfig("grob", "xml", {
        "title": "titleStmt/title",
        "paragraph": "body/p",
        "reference": "listBibl/biblStruct",
    })
    [record] = parse_xml_extraction(path, config, "title", KEY)
    assert record.units == (("Deep", "Parsing"),)
    assert record.flags == ()
    assert record.tool == "grob"
    assert record.key == KEY

    [record] = parse_xml_extraction(path, config, "paragraph", KEY)
    # nested markup text is concatenated in document order, one unit per match
    assert record.units == (("First", "body", "paragraph."),
                            ("Second", "paragraph", "here."))

    [record] = parse_xml_extraction(path, config, "reference", KEY)
    assert record.units == (("Smith", "2019", "Parsing"),
                            ("Jones", "2020", "Trees"))


def test_xml_adapter_raw_elementpath_passthrough(tmp_path: Path):
    path = tmp_path / "1401.0001_0.xml"
    path.write_text(TEI_LIKE, encoding="utf-8")
    config = AdapterConfig("grob", "xml", {
        "title": ".//{http://example.org/ns}title",
    })
    [record] = parse_xml_extraction(path, config, "title", KEY)
    assert record.units == (("Deep", "Parsing"),)


def test_xml_adapter_selector_miss(tmp_path: Path):
    path = tmp_path / "1401.0001_0.xml"
    path.write_text(TEI_LIKE, encoding="utf-8")
    config = AdapterConfig("grob", "xml", {"table": "figure/table"})
    # mapped selector, zero matches
    [record] = parse_xml_extraction(path, config, "table", KEY)
    assert record.units == ()
    assert SELECTOR_MISS in record.flags
    # label absent from the map entirely
    [record] = parse_xml_extraction(path, config, "footer", KEY)
    assert record.units == ()
    assert SELECTOR_MISS in record.flags


def test_xml_adapter_rejects_malformed(tmp_path: Path):
    path = tmp_path / "1401.0001_0.xml"
    path.write_text("<a><b></a>", encoding="utf-8")
    config = AdapterConfig("grob", "xml", {"title": "b"})
    with pytest.raises(XmlParseError):
        parse_xml_extraction(path, config, "title", KEY)


JSON_DOC = {
    "meta": {
        "title": "Deep Parsing",
        "authors": [{"name": "Yuta Hamada"}, {"name": "Gary Shiu"}],
        "year": 2014,
    },
    "sections": ["Intro", "Methods"],
    "missing_leaf": None,
}


def test_json_adapter_paths(tmp_path: Path):
    path = tmp_path / "1401.0001_0.json"
    path.write_text(json.dumps(JSON_DOC), encoding="utf-8")
    config = AdapterConfig("pars", "json", {
        "title": "meta.title",
        "author": "meta.authors.name",
        "section": "sections",
        "footer": "meta.year",
    })
    [record] = parse_json_extraction(path, config, "title", KEY)
    assert record.units == (("Deep", "Parsing"),)

    # a list along the path is mapped over
    [record] = parse_json_extraction(path, config, "author", KEY)
    assert record.units == (("Yuta", "Hamada"), ("Gary", "Shiu"))

    # a list of strings at the leaf: one item per string
    [record] = parse_json_extraction(path, config, "section", KEY)
    assert record.units == (("Intro",), ("Methods",))

    # numbers stringify
    [record] = parse_json_extraction(path, config, "footer", KEY)
    assert record.units == (("2014",),)


def test_json_adapter_absent_path_is_a_miss(tmp_path: Path):
    path = tmp_path / "1401.0001_0.json"
    path.write_text(json.dumps(JSON_DOC), encoding="utf-8")
    config = AdapterConfig("pars", "json", {"abstract": "meta.abstract"})
    [record] = parse_json_extraction(path, config, "abstract", KEY)
    assert record.units == ()
    assert SELECTOR_MISS in record.flags


def test_json_adapter_bad_leaf_types(tmp_path: Path):
    path = tmp_path / "1401.0001_0.json"
    path.write_text(json.dumps(JSON_DOC), encoding="utf-8")
    # ends at an object
    config = AdapterConfig("pars", "json", {"author": "meta.authors"})
    with pytest.raises(PathTypeError):
        parse_json_extraction(path, config, "author", KEY)
    # ends at null
    config = AdapterConfig("pars", "json", {"footer": "missing_leaf"})
    with pytest.raises(PathTypeError):
        parse_json_extraction(path, config, "footer", KEY)


def test_json_adapter_rejects_malformed(tmp_path: Path):
    path = tmp_path / "1401.0001_0.json"
    path.write_text("{broken", encoding="utf-8")
    config = AdapterConfig("pars", "json", {"title": "t"})
    with pytest.raises(JsonParseError):
        parse_json_extraction(path, config, "title", KEY)


def test_csv_adapter_flattens_row_major(tmp_path: Path):
    path = tmp_path / "1401.0001_0.csv"
    path.write_text('Model,Acc\nOurs,"0.91 est"\nBase,0.85\n', encoding="utf-8")
    [record] = parse_table_csv(path, "tab", KEY)
    assert record.label == "table"
    assert record.units == (("Model", "Acc"), ("Ours", "0.91", "est"),
                            ("Base", "0.85"))
    assert record.tokens == ("Model", "Acc", "Ours", "0.91", "est",
                             "Base", "0.85")


def test_csv_adapter_skips_blank_rows(tmp_path: Path):
    path = tmp_path / "1401.0001_0.csv"
    path.write_text("a,b\n\n,,\nc,d\n", encoding="utf-8")
    [record] = parse_table_csv(path)
    assert record.units == (("a", "b"), ("c", "d"))


def test_csv_adapter_rejects_unreadable(tmp_path: Path):
    path = tmp_path / "1401.0001_0.csv"
    path.write_text('a,"b\nnever closed', encoding="utf-8")
    try:
        parse_table_csv(path)
    except CsvParseError:
        pass  # acceptable: csv module versions differ on this input


TEXT_FILE = "Line one here\nLine two\nLine three\nLine four\nLine five\n"


def test_text_adapter_line_rules(tmp_path: Path):
    path = tmp_path / "1401.0001_0.txt"
    path.write_text(TEXT_FILE, encoding="utf-8")
    config = AdapterConfig("plain", "text", {
        "title": "1",
        "paragraph": "2-4",
        "reference": "5-",
        "abstract": "*",
    })
    [record] = parse_plaintext(path, config, "title", KEY)
    assert record.units == (("Line", "one", "here"),)

    [record] = parse_plaintext(path, config, "paragraph", KEY)
    assert record.units == (("Line", "two"), ("Line", "three"), ("Line", "four"))

    [record] = parse_plaintext(path, config, "reference", KEY)
    assert record.units == (("Line", "five"),)

    [record] = parse_plaintext(path, config, "abstract", KEY)
    assert len(record.units) == 5


def test_text_adapter_range_beyond_eof(tmp_path: Path):
    path = tmp_path / "1401.0001_0.txt"
    path.write_text("only one line\n", encoding="utf-8")
    config = AdapterConfig("plain", "text", {"reference": "3-9", "title": "1-5"})
    [record] = parse_plaintext(path, config, "reference", KEY)
    assert record.units == ()
    assert SELECTOR_MISS in record.flags
    # a rule that starts in range is clamped, not a miss
    [record] = parse_plaintext(path, config, "title", KEY)
    assert record.units == (("only", "one", "line"),)
    assert SELECTOR_MISS not in record.flags


def test_text_adapter_unmapped_label(tmp_path: Path):
    path = tmp_path / "1401.0001_0.txt"
    path.write_text(TEXT_FILE, encoding="utf-8")
    config = AdapterConfig("plain", "text", {"title": "1"})
    [record] = parse_plaintext(path, config, "footer", KEY)
    assert record.units == ()
    assert SELECTOR_MISS in record.flags


def test_text_adapter_invalid_rules(tmp_path: Path):
    path = tmp_path / "1401.0001_0.txt"
    path.write_text(TEXT_FILE, encoding="utf-8")
    for rule in ("0", "4-2", "x", "1-2-3"):
        config = AdapterConfig("plain", "text", {"title": rule})
        with pytest.raises(ConfigError):
            parse_plaintext(path, config, "title", KEY)


def test_lossy_decode_flag(tmp_path: Path):
    path = tmp_path / "1401.0001_0.txt"
    path.write_bytes(b"good line\nbad \xff byte\n")
    config = AdapterConfig("plain", "text", {"title": "*"})
    [record] = parse_plaintext(path, config, "title", KEY)
    assert LOSSY_DECODE in record.flags
    assert record.units[0] == ("good", "line")


def test_restrict_units_keeps_covered_items():
    gt = tokenize("Smith 2019 Parsing with neural networks")
    units = (
        tokenize("Smith 2019 Parsing"),        # covered exactly
        tokenize("Totally unrelated citation"),  # not covered
        tokenize("with neurol networks"),       # covered with small noise
    )
    kept = restrict_units(units, gt)
    assert kept == (units[0], units[2])


def test_restrict_units_identity_when_all_match():
    gt = tokenize("a b c d e f")
    units = (tokenize("a b"), tokenize("c d"), tokenize("e f"))
    assert restrict_units(units, gt) == units


def test_restrict_units_empty_ground_truth():
    assert restrict_units((tokenize("anything"),), ()) == ()


def test_restrict_units_threshold_controls_keep():
    gt = tokenize("alpha beta gamma")
    units = (tokenize("alpha bexa"),)  # one substitution against "alpha beta"
    assert ratio_reference("alpha bexa", "alpha beta") == 0.9
    assert restrict_units(units, gt, MatchConfig(threshold=0.9)) == units
    assert restrict_units(units, gt, MatchConfig(threshold=0.95)) == ()


def test_restrict_units_long_document_scenario():
    # thirty reference items of dissimilar text, a page covering only twelve
    import random
    rng = random.Random(1401)
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789"
    refs = [" ".join("".join(rng.choice(alphabet) for _ in range(8))
                     for _ in range(5))
            for _ in range(30)]
    gt_tokens = tokenize(" ".join(refs[9:21]))
    units = tuple(tokenize(r) for r in refs)
    kept = restrict_units(units, gt_tokens)
    assert kept == units[9:21]


def test_restrict_to_ground_truth_checks_document(tmp_path: Path):
    page = _gt_page({"reference": ["Smith", "2019"]})
    record = ExtractionRecord("t", PageKey("9999.9999", 0), "reference",
                              (("Smith", "2019"),))
    with pytest.raises(ValueError):
        restrict_to_ground_truth(record, page, "reference")

    record = ExtractionRecord("t", DocumentKey("1401.0001"), "reference",
                              (("Smith", "2019"), ("Noise", "words")))
    out = restrict_to_ground_truth(record, page, "reference")
    assert out.units == (("Smith", "2019"),)
    assert out.tool == "t"
    # token multiset of the output is a subset of the input
    assert set(out.tokens) <= set(record.tokens)


def test_jsonl_round_trip(tmp_path: Path):
    records = [
        ExtractionRecord("t", KEY, "title", (("Deep", "Parsing"),)),
        ExtractionRecord("t", DocumentKey("1401.0001"), "reference",
                         (("Smith",), ("Jones",))),
        ExtractionRecord("t", None, "table", ()),
    ]
    path = tmp_path / "records.jsonl"
    write_records_jsonl(records, path)
    loaded = read_records_jsonl(path)
    assert len(loaded) == 3
    assert loaded[0].key == KEY
    assert loaded[0].tokens == ("Deep", "Parsing")
    assert loaded[1].key == DocumentKey("1401.0001")
    # item boundaries are flattened by the dump format
    assert loaded[1].units == (("Smith", "Jones"),)
    assert loaded[2].key is None
    assert loaded[2].units == ()

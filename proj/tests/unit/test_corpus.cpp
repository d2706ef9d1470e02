#include "doctest.h"

#include "aicl/corpus.hpp"
#include "aicl/error.hpp"
#include "aicl/hashing.hpp"
#include "tempdir.hpp"

using namespace aicl;
using aicl::testing::slurp;
using aicl::testing::TempDir;

namespace {

DatasetManifest binary_manifest() {
    DatasetManifest m;
    m.name = "bin";
    m.num_classes = 2;
    m.class_names = {"negative", "positive"};
    m.verbaliser_sets = {{"negative"}, {"positive"}};
    return m;
}

}  // namespace

TEST_CASE("hashing primitives") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(splitmix64(0) != splitmix64(1));
}

TEST_CASE("instance store enforces unique ids") {
    CHECK_THROWS_AS(InstanceStore({{"a", "x", 0}, {"a", "y", 1}}), DuplicateIdError);
    try {
        InstanceStore({{"a", "x", 0}, {"a", "y", 1}});
    } catch (const DuplicateIdError& e) {
        CHECK(std::string(e.what()).find("\"a\"") != std::string::npos);
    }
    InstanceStore s({{"b", "x", 0}, {"a", "y", 1}});
    REQUIRE(s.find("a") != nullptr);
    CHECK(s.find("a")->text == "y");
    CHECK(s.position("b") == 0);
    CHECK(s.find("zz") == nullptr);
    CHECK(s.label_histogram(2) == std::vector<std::size_t>{1, 1});
}

TEST_CASE("manifest validation and presets") {
    auto m = manifest_preset("sst2");
    CHECK(m.num_classes == 2);
    CHECK(m.verbaliser_sets[0] == std::vector<std::string>{"negative", "false"});
    CHECK(m.verbaliser_sets[1] == std::vector<std::string>{"positive", "true"});
    auto ag = manifest_preset("agnews");
    CHECK(ag.class_names == std::vector<std::string>{"World", "Sports", "Business", "Sci/Tech"});
    CHECK(ag.verbaliser_sets[3] == std::vector<std::string>{"science"});
    auto jg = manifest_preset("jigsaw");
    CHECK(jg.verbaliser_sets[0][0] == "clean");
    CHECK(jg.verbaliser_sets[1] == std::vector<std::string>{"toxic", "offensive"});
    CHECK_THROWS_AS(manifest_preset("imdb"), ManifestError);

    auto bad = binary_manifest();
    bad.verbaliser_sets = {{"good"}, {"GOOD"}};
    CHECK_THROWS_AS(bad.validate(), ManifestError);
    bad = binary_manifest();
    bad.num_classes = 1;
    CHECK_THROWS_AS(bad.validate(), ManifestError);
    bad = binary_manifest();
    bad.verbaliser_sets = {{"a"}, {}};
    CHECK_THROWS_AS(bad.validate(), ManifestError);

    TempDir tmp;
    save_manifest(ag, tmp / "m.json");
    CHECK(load_manifest(tmp / "m.json") == ag);
}

TEST_CASE("jsonl ingest: empty file gives empty store") {
    TempDir tmp;
    const auto p = tmp.write("empty.jsonl", "");
    const auto s = ingest_file(p, SourceFormat::jsonl, binary_manifest());
    CHECK(s.size() == 0);
}

TEST_CASE("jsonl ingest: 6-line fixture round-trips byte-identically") {
    TempDir tmp;
    const std::string fixture =
        "{\"id\":\"a\",\"text\":\"good movie\",\"label\":1}\n"
        "{\"id\":\"b\",\"text\":\"bad movie\",\"label\":0}\n"
        "{\"id\":\"c\",\"text\":\"caf\\u00e9 \\\"quoted\\\"\",\"label\":1}\n"
        "{\"id\":\"d\",\"text\":\"tab\\there\",\"label\":0}\n"
        "{\"id\":\"e\",\"text\":\"fine\",\"label\":1}\n"
        "{\"id\":\"f\",\"text\":\"awful\",\"label\":0}\n";
    const auto src = tmp.write("in.jsonl", fixture);
    const auto store = ingest_file(src, SourceFormat::jsonl, binary_manifest());
    REQUIRE(store.size() == 6);
    write_store(store, tmp / "canon.jsonl");
    const auto canonical = slurp(tmp / "canon.jsonl");
    const auto reread = load_store(tmp / "canon.jsonl");
    CHECK(reread == store);
    write_store(reread, tmp / "canon2.jsonl");
    CHECK(slurp(tmp / "canon2.jsonl") == canonical);
    CHECK(store[2].text == "caf\xc3\xa9 \"quoted\"");
}

TEST_CASE("load keeps file order and rejects duplicate ids") {
    TempDir tmp;
    const auto p = tmp.write("three.jsonl",
                             "{\"id\":\"z\",\"text\":\"one\",\"label\":0}\n"
                             "{\"id\":\"a\",\"text\":\"two\",\"label\":1}\n"
                             "{\"id\":\"m\",\"text\":\"three\",\"label\":0}\n");
    const auto s = load_store(p);
    REQUIRE(s.size() == 3);
    CHECK(s[0].id == "z");
    CHECK(s[1].id == "a");
    CHECK(s[2].id == "m");

    const auto dup = tmp.write("dup.jsonl",
                               "{\"id\":\"a\",\"text\":\"one\",\"label\":0}\n"
                               "{\"id\":\"a\",\"text\":\"two\",\"label\":1}\n");
    CHECK_THROWS_AS(load_store(dup), DuplicateIdError);
}

TEST_CASE("jsonl ingest errors name the line and the value") {
    TempDir tmp;
    const auto bad_label = tmp.write("l.jsonl",
                                     "{\"id\":\"a\",\"text\":\"x\",\"label\":0}\n"
                                     "{\"id\":\"b\",\"text\":\"y\",\"label\":7}\n");
    try {
        ingest_file(bad_label, SourceFormat::jsonl, binary_manifest());
        FAIL("expected IngestError");
    } catch (const IngestError& e) {
        const std::string msg = e.what();
        CHECK(msg.find(":2:") != std::string::npos);
        CHECK(msg.find('7') != std::string::npos);
    }
    const auto malformed = tmp.write("m.jsonl", "{\"id\":\"a\",\"text\":\"x\",\"label\":0}\n{not json\n");
    try {
        ingest_file(malformed, SourceFormat::jsonl, binary_manifest());
        FAIL("expected IngestError");
    } catch (const IngestError& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    const auto by_name = tmp.write("n.jsonl", "{\"text\":\"x\",\"label\":\"positive\"}\n");
    const auto s = ingest_file(by_name, SourceFormat::jsonl, binary_manifest(), "row-");
    CHECK(s[0].label == 1);
    CHECK(s[0].id == "row-000001");
}

TEST_CASE("agnews csv adapter") {
    TempDir tmp;
    const auto p = tmp.write("train.csv",
                             "\"3\",\"Wall St. Bears Claw Back\",\"Reuters - Short-sellers \\\\band of ultra-cynics\"\n"
                             "\"1\",\"Iraq vote\",\"Officials said, \"\"quoted\"\"\nacross lines\"\n"
                             "\"4\",\"New chip\",\"faster\"\n"
                             "\"2\",\"Cup final\",\"goal\"\n");
    const auto s = ingest_file(p, SourceFormat::agnews_csv, manifest_preset("agnews"), "train-");
    REQUIRE(s.size() == 4);
    CHECK(s[0].label == 2);
    CHECK(s[1].label == 0);
    CHECK(s[2].label == 3);
    CHECK(s[3].label == 1);
    CHECK(s[0].text.find('\\') == std::string::npos);
    CHECK(s[1].text.find("\"quoted\"") != std::string::npos);
    CHECK(s[0].id == "train-000001");
    CHECK(s.label_histogram(4) == std::vector<std::size_t>{1, 1, 1, 1});

    const auto bad = tmp.write("bad.csv", "\"1\",\"a\",\"b\"\n\"5\",\"c\",\"d\"\n");
    try {
        ingest_file(bad, SourceFormat::agnews_csv, manifest_preset("agnews"));
        FAIL("expected IngestError");
    } catch (const IngestError& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
        CHECK(std::string(e.what()).find('5') != std::string::npos);
    }
}

TEST_CASE("sst2 tsv adapter") {
    TempDir tmp;
    const auto p = tmp.write("train.tsv", "sentence\tlabel\nit 's a charming journey \t1\nbland and dull\t0\n");
    const auto s = ingest_file(p, SourceFormat::sst2_tsv, manifest_preset("sst2"));
    REQUIRE(s.size() == 2);
    CHECK(s[0].label == 1);
    CHECK(s[1].text == "bland and dull");
    const auto bad = tmp.write("bad.tsv", "fine\t1\nno label here\n");
    CHECK_THROWS_AS(ingest_file(bad, SourceFormat::sst2_tsv, manifest_preset("sst2")), IngestError);
}

TEST_CASE("jigsaw adapter collapses six flags to any-toxic") {
    TempDir tmp;
    const std::string header = "id,comment_text,toxic,severe_toxic,obscene,threat,insult,identity_hate\n";
    tmp.write("src/train.csv", header +
                                   "a1,\"clean words\",0,0,0,0,0,0\n"
                                   "a2,\"only insult\",0,0,0,0,1,0\n"
                                   "a3,\"all of it\",1,1,1,1,1,1\n"
                                   "a4,\"just hate\",0,0,0,0,0,1\n");
    tmp.write("src/test.csv", "id,comment_text\nt1,\"hello\"\nt2,\"unscored\"\nt3,\"threat\"\n");
    tmp.write("src/test_labels.csv",
              "id,toxic,severe_toxic,obscene,threat,insult,identity_hate\n"
              "t1,0,0,0,0,0,0\nt2,-1,-1,-1,-1,-1,-1\nt3,0,0,0,1,0,0\n");
    const auto r = ingest(tmp / "src", SourceFormat::jigsaw_csv, manifest_preset("jigsaw"));
    REQUIRE(r.train.size() == 4);
    CHECK(r.train.find("a1")->label == 0);
    CHECK(r.train.find("a2")->label == 1);
    CHECK(r.train.find("a3")->label == 1);
    CHECK(r.train.find("a4")->label == 1);
    const auto h = r.train.label_histogram(2);
    CHECK(h[0] + h[1] == r.train.size());
    REQUIRE(r.test.size() == 2);
    CHECK(r.test.find("t2") == nullptr);
    CHECK(r.test.find("t3")->label == 1);
}

TEST_CASE("id-hash split is deterministic and disjoint") {
    std::vector<LabeledInstance> rows;
    for (int i = 0; i < 200; ++i) {
        rows.push_back({"id" + std::to_string(i), "text " + std::to_string(i), i % 2});
    }
    const InstanceStore all(rows);
    const auto a = split_by_id_hash(all, 0.25);
    const auto b = split_by_id_hash(all, 0.25);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.train.size() + a.test.size() == 200);
    for (const auto& x : a.test) {
        CHECK(a.train.find(x.id) == nullptr);
    }
    CHECK(a.test.size() > 20);
    CHECK(a.test.size() < 80);
}

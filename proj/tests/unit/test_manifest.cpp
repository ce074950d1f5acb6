// Copyright 2026 The psd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "psd/error.hpp"
#include "psd/manifest.hpp"
#include "support/generators.hpp"
#include "support/temp_dir.hpp"

using namespace psd;

namespace {

const std::string kHeader = "utt_id,speaker_id,label,split,path,duration_s\n";

Manifest parse(const std::string& body) {
  std::istringstream in(kHeader + body);
  return parse_manifest(in, "m.csv");
}

std::string error_of(const std::string& text) {
  try {
    std::istringstream in(text);
    parse_manifest(in, "m.csv");
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("two-row manifest loads in order") {
  const auto m = parse("u1,A,healthy,train,a.wav,5\nu2,B,pathological,test,b.wav,4.5\n");
  REQUIRE(m.size() == 2);
  CHECK(m.records()[0].utt_id == "u1");
  CHECK(m.records()[1].label == Label::pathological);
  CHECK(m.records()[1].split == Split::test);
  CHECK(m.records()[1].duration_s == 4.5);
  CHECK(m.split(Split::train).size() == 1);
}

TEST_CASE("speaker in both splits is a distinct error") {
  CHECK_THROWS_AS(parse("u1,A,healthy,train,a.wav,5\nu2,A,healthy,test,b.wav,5\n"), SpeakerOverlapError);
}

TEST_CASE("parse errors name the line") {
  CHECK(error_of("utt,speaker\n").find("m.csv:1: bad header") != std::string::npos);
  CHECK(error_of(kHeader + "u1,A,healthy,train,a.wav,5\nu2,B,ill,test,b.wav,5\n").find("m.csv:3") != std::string::npos);
  CHECK(error_of(kHeader + "u1,A,healthy,train,a.wav\n").find("expected 6 fields") != std::string::npos);
  CHECK(error_of(kHeader + "u1,A,healthy,train,a.wav,-1\n").find("negative") != std::string::npos);
  CHECK(error_of(kHeader + "u1,A,healthy,train,a.wav,abc\n").find("invalid duration") != std::string::npos);
  CHECK(error_of(kHeader + "u1,A,healthy,train,a.wav,1\nu1,B,healthy,test,b.wav,1\n").find("duplicate") !=
        std::string::npos);
  CHECK(error_of("").find("empty") != std::string::npos);
}

TEST_CASE("BOM and CRLF are accepted") {
  std::istringstream in("\xEF\xBB\xBF" + std::string("utt_id,speaker_id,label,split,path,duration_s\r\nu1,A,healthy,train,a.wav,1\r\n"));
  CHECK(parse_manifest(in, "m.csv").size() == 1);
}

TEST_CASE("paths resolve against the root, or the manifest directory by default") {
  testing::TempDir dir;
  std::vector<UtteranceRecord> records{{"u1", "A", Label::healthy, Split::train, "wav/a.wav", 1.0},
                                       {"u2", "B", Label::healthy, Split::test, "/abs/b.wav", 1.0}};
  write_manifest(dir / "m.csv", records);
  const auto m = load_manifest(dir / "m.csv");
  CHECK(m.resolve(m.records()[0]) == std::filesystem::absolute(dir.path()) / "wav/a.wav");
  CHECK(m.resolve(m.records()[1]) == "/abs/b.wav");
  const auto rooted = load_manifest(dir / "m.csv", std::filesystem::path("/data"));
  CHECK(rooted.resolve(rooted.records()[0]) == "/data/wav/a.wav");
  CHECK_THROWS_AS(load_manifest(dir / "missing.csv"), DataError);
}

TEST_CASE("write then load preserves records") {
  testing::TempDir dir;
  std::vector<UtteranceRecord> records{{"u,1", "spk \"A\"", Label::pathological, Split::train, "x.wav", 0.123456789},
                                       {"u2", "B", Label::healthy, Split::test, "y.wav", 7.0}};
  write_manifest(dir / "m.csv", records);
  const auto m = load_manifest(dir / "m.csv");
  REQUIRE(m.size() == 2);
  CHECK(m.records()[0].utt_id == "u,1");
  CHECK(m.records()[0].speaker_id == "spk \"A\"");
  CHECK(m.records()[0].duration_s == 0.123456789);
}

TEST_CASE("corpus-shaped manifest: 10 train and 12 test speakers") {
  std::string body;
  for (int s = 0; s < 22; ++s)
    for (int u = 0; u < 3; ++u)
      body += "s" + std::to_string(s) + "_" + std::to_string(u) + ",spk" + std::to_string(s) + "," +
              (u % 2 ? "healthy" : "pathological") + "," + (s < 10 ? "train" : "test") + ",x.wav,5\n";
  const auto summary = summarize(parse(body));
  CHECK(summary.train.speakers == 10);
  CHECK(summary.test.speakers == 12);
}

TEST_CASE("summarize statistics") {
  SUBCASE("empty split flags absent means") {
    const auto s = summarize(parse("u1,A,healthy,train,a.wav,5\n"));
    CHECK(s.test.speakers == 0);
    CHECK(s.test.utterances() == 0);
    CHECK_FALSE(s.test.mean_duration_per_speaker_s.has_value());
    CHECK_FALSE(s.test.majority_fraction.has_value());
  }
  SUBCASE("one speaker, three 5 s utterances") {
    const auto s = summarize(parse("a,A,healthy,train,a.wav,5\nb,A,healthy,train,b.wav,5\nc,A,healthy,train,c.wav,5\n"));
    CHECK(s.train.total_duration_s == 15.0);
    CHECK(*s.train.mean_duration_per_speaker_s == 15.0);
  }
  SUBCASE("57.82% majority test split") {
    std::string body = "t,T,healthy,train,t.wav,1\n";
    for (int i = 0; i < 10000; ++i)
      body += "u" + std::to_string(i) + ",S" + std::to_string(i % 7) + "," + (i < 5782 ? "healthy" : "pathological") +
              ",test,x.wav,1\n";
    const auto s = summarize(parse(body));
    CHECK(*s.test.majority_fraction == doctest::Approx(0.5782).epsilon(1e-12));
    CHECK(*s.test.majority_label == Label::healthy);
  }
}

TEST_CASE("property: loaded manifests have disjoint speaker splits; summarize ignores order") {
  testing::for_all(50, 5, [](testing::Gen& g, std::uint64_t) {
    std::vector<UtteranceRecord> records;
    const int n = g.integer(1, 60);
    for (int i = 0; i < n; ++i) {
      const int speaker = g.integer(0, 9);
      records.push_back({"u" + std::to_string(i), "s" + std::to_string(speaker),
                         g.coin() ? Label::healthy : Label::pathological,
                         g.coin(0.3) ? Split::test : Split::train, "x.wav", g.uniform(0.1, 9.0)});
    }
    std::optional<Manifest> m;
    try {
      m.emplace(records);
    } catch (const SpeakerOverlapError&) {
      return;
    }
    std::set<std::string> train, test;
    for (const auto& r : m->records()) (r.split == Split::train ? train : test).insert(r.speaker_id);
    for (const auto& s : train) CHECK(test.count(s) == 0);

    auto shuffled = records;
    std::shuffle(shuffled.begin(), shuffled.end(), g.engine());
    const auto a = summarize(*m);
    const auto b = summarize(Manifest(shuffled));
    for (auto [x, y] : {std::pair{a.train, b.train}, std::pair{a.test, b.test}}) {
      CHECK(x.speakers == y.speakers);
      CHECK(x.healthy_utterances == y.healthy_utterances);
      CHECK(x.total_duration_s == y.total_duration_s);
      CHECK(x.mean_duration_per_speaker_s == y.mean_duration_per_speaker_s);
      CHECK(x.majority_fraction == y.majority_fraction);
    }
  });
}

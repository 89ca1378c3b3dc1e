#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <functional>
#include <string>

#include "doctest.h"
#include "ozlab/run_config.hpp"

using namespace oz;

namespace {

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool mentions(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("key value parsing with comments") {
  RunConfig cfg = parse_config_text(
      "# header comment\n"
      "d = 2\n"
      "p = 0.55   # trailing comment\n"
      "\n"
      "bc = wired\n"
      "radii = 1 2 4 8\n"
      "centered = true\n",
      "t.cfg");
  CHECK(cfg.get_int("d") == 2);
  CHECK(cfg.get_double("p") == doctest::Approx(0.55));
  CHECK(cfg.get_string("bc") == "wired");
  CHECK(cfg.get_bool("centered"));
  CHECK(cfg.get_int_list("radii") == std::vector<int64_t>{1, 2, 4, 8});
  CHECK(cfg.has("d"));
  CHECK_FALSE(cfg.has("q"));
  CHECK(cfg.get_double("q", 1.5) == doctest::Approx(1.5));
  CHECK(cfg.get_string("dyn", "auto") == "auto");
  CHECK(mentions(cfg.where("p"), "t.cfg:3"));
}

TEST_CASE("malformed lines are reported with their line number") {
  CHECK(mentions(error_of([] { parse_config_text("a = 1\nnonsense line\n", "f.cfg"); }),
                 "f.cfg:2"));
  CHECK(mentions(error_of([] { parse_config_text("a = \n", "f.cfg"); }), "empty value"));
  CHECK(mentions(error_of([] { parse_config_text("bad key! = 1\n", "f.cfg"); }), "f.cfg:1"));
  std::string dup = error_of([] { parse_config_text("a = 1\nb = 2\na = 3\n", "f.cfg"); });
  CHECK(mentions(dup, "duplicate"));
  CHECK(mentions(dup, "'a'"));
  CHECK(mentions(dup, "line 1"));
}

TEST_CASE("typed getter failures name the key and location") {
  RunConfig cfg = parse_config_text("n = 12x\nw = 0.5 0.7\nflag = maybe\n", "g.cfg");
  std::string e1 = error_of([&] { cfg.get_int("n"); });
  CHECK(mentions(e1, "g.cfg:1"));
  CHECK(mentions(e1, "'n'"));
  CHECK(mentions(e1, "12x"));
  CHECK(mentions(error_of([&] { cfg.get_double("w"); }), "'w'"));
  CHECK(mentions(error_of([&] { cfg.get_bool("flag"); }), "flag"));
  CHECK(mentions(error_of([&] { cfg.get_string("missing"); }), "missing"));
  CHECK(cfg.get_double_list("w") == std::vector<double>{0.5, 0.7});
}

TEST_CASE("bool spellings") {
  RunConfig cfg = parse_config_text("a = yes\nb = OFF\nc = 1\nd = false\n", "b.cfg");
  CHECK(cfg.get_bool("a"));
  CHECK_FALSE(cfg.get_bool("b"));
  CHECK(cfg.get_bool("c"));
  CHECK_FALSE(cfg.get_bool("d"));
}

TEST_CASE("unknown keys are named with their location") {
  RunConfig cfg = parse_config_text("d = 2\nbogus_key = 5\n", "u.cfg");
  std::string e = error_of([&] { cfg.require_known_keys({"d", "p", "q"}); });
  CHECK(mentions(e, "unknown config key"));
  CHECK(mentions(e, "bogus_key"));
  CHECK(mentions(e, "u.cfg:2"));
  cfg.require_known_keys({"d", "bogus_key"});
}

TEST_CASE("json configs parse to the same shape") {
  RunConfig cfg = parse_config_text(
      R"({"d": 3, "p": 0.85, "bc": "free", "radii": [2, 4, 8], "centered": false})", "j.json");
  CHECK(cfg.get_int("d") == 3);
  CHECK(cfg.get_double("p") == doctest::Approx(0.85));
  CHECK(cfg.get_string("bc") == "free");
  CHECK_FALSE(cfg.get_bool("centered"));
  CHECK(cfg.get_int_list("radii") == std::vector<int64_t>{2, 4, 8});

  CHECK(mentions(error_of([] { parse_config_text("{\"a\": 1,}", "bad.json"); }), "invalid JSON"));
  CHECK(mentions(error_of([] { parse_config_text("[1, 2]", "arr.json"); }), "arr.json"));
  CHECK(error_of([] { parse_config_text(R"({"a": {"nested": 1}})", "n.json"); }) != "");
}

TEST_CASE("snapshot is sorted and canonical") {
  RunConfig a = parse_config_text("z = 1\na = 2\nm = 3\n", "s.cfg");
  RunConfig b = parse_config_text(R"({"m": 3, "z": 1, "a": 2})", "s.json");
  CHECK(a.snapshot() == "a = 2\nm = 3\nz = 1\n");
  CHECK(a.snapshot() == b.snapshot());
}

TEST_CASE("missing config file") {
  CHECK(mentions(error_of([] { load_config("/nonexistent/path/x.cfg"); }), "x.cfg"));
}

#include <cstdio>
#include <stdexcept>

#include "doctest.h"
#include "sami/checkpoint.hpp"
#include "sami/io.hpp"
#include "sami/rng.hpp"

using namespace sami;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("ckpt-test-" + name + ".json") {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("checkpoints round trip bitwise") {
  Tensor w = Tensor::from({2, 3}, {1e-300, 3.141592653589793, -0.1, 1e300, -1e-17, 42.0});
  Tensor b = Tensor::vector({0.1 + 0.2, 1.0 / 3.0});
  const Tensor w0 = w, b0 = b;
  std::vector<NamedParam> params{{"layer.w", &w}, {"layer.b", &b}};

  TempFile f("roundtrip");
  save_checkpoint(f.path, params, {{"seed", "7"}, {"variant", "tesac"}});

  w.fill(0.0);
  b.fill(0.0);
  std::map<std::string, std::string> meta;
  load_checkpoint(f.path, params, &meta);
  for (std::size_t i = 0; i < w.numel(); ++i) CHECK(w[i] == w0[i]);
  for (std::size_t i = 0; i < b.numel(); ++i) CHECK(b[i] == b0[i]);
  CHECK(meta.at("seed") == "7");
  CHECK(meta.at("variant") == "tesac");
  CHECK(checkpoint_meta(f.path).at("seed") == "7");
}

TEST_CASE("loading rejects missing, extra and misshapen parameters") {
  Tensor w = Tensor::vector({1.0, 2.0});
  std::vector<NamedParam> params{{"w", &w}};
  TempFile f("errors");
  save_checkpoint(f.path, params, {});

  Tensor other = Tensor::vector({1.0, 2.0});
  std::vector<NamedParam> renamed{{"v", &other}};
  CHECK_THROWS_WITH_AS(load_checkpoint(f.path, renamed), "checkpoint missing parameter: v",
                       std::runtime_error);

  Tensor extra = Tensor::vector({0.0});
  std::vector<NamedParam> two{{"w", &w}, {"extra", &extra}};
  CHECK_THROWS_WITH_AS(load_checkpoint(f.path, two), "checkpoint parameter count mismatch",
                       std::runtime_error);

  Tensor wide = Tensor::vector({1.0, 2.0, 3.0});
  std::vector<NamedParam> misshapen{{"w", &wide}};
  CHECK_THROWS_WITH_AS(load_checkpoint(f.path, misshapen), "checkpoint shape mismatch for w",
                       std::runtime_error);
}

TEST_CASE("saving rejects duplicate names and junk files fail to load") {
  Tensor w = Tensor::scalar(1.0);
  std::vector<NamedParam> dup{{"w", &w}, {"w", &w}};
  TempFile f("dup");
  CHECK_THROWS_WITH_AS(save_checkpoint(f.path, dup, {}), "duplicate parameter name: w",
                       std::invalid_argument);

  TempFile junk("junk");
  atomic_write_file(junk.path, "{\"version\": \"something-else\"}");
  std::vector<NamedParam> one{{"w", &w}};
  CHECK_THROWS_AS(load_checkpoint(junk.path, one), std::runtime_error);
}

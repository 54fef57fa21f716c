#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "coldmri/io.hpp"
#include "coldmri/phantom.hpp"

namespace fs = std::filesystem;
using coldmri::ColumnMask;
using coldmri::ComplexImage;
using coldmri::MaskFamily;
using coldmri::ScheduleKind;
using coldmri::ScheduleSpec;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("coldmri_io_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

MaskFamily sample_family() {
  return coldmri::build_mask_family(ScheduleSpec(ScheduleKind::kLog, 10, 0.2),
                                    16, 2.0 / 16, 42);
}

}  // namespace

TEST_CASE("complex images round-trip bit-exactly") {
  TempDir tmp;
  const ComplexImage img = coldmri::make_phantom(9, 13, 21);
  const fs::path p = tmp.path / "img.cim";
  coldmri::write_cim(p, img);
  const ComplexImage back = coldmri::read_cim(p);
  REQUIRE(back.same_shape_as(img));
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 13; ++c) {
      // Storage is float32, so compare against the rounded original.
      CHECK(back(r, c).real() == static_cast<double>(static_cast<float>(img(r, c).real())));
      CHECK(back(r, c).imag() == static_cast<double>(static_cast<float>(img(r, c).imag())));
    }
  }
  // A second write of the loaded image is byte-identical.
  const fs::path p2 = tmp.path / "img2.cim";
  coldmri::write_cim(p2, back);
  CHECK(slurp(p) == slurp(p2));
}

TEST_CASE("image files reject corruption") {
  TempDir tmp;
  const ComplexImage img = coldmri::make_phantom(4, 4, 1);
  const fs::path p = tmp.path / "img.cim";
  coldmri::write_cim(p, img);
  std::vector<char> bytes = slurp(p);

  std::vector<char> truncated(bytes.begin(), bytes.end() - 3);
  spit(tmp.path / "trunc.cim", truncated);
  CHECK_THROWS_AS(coldmri::read_cim(tmp.path / "trunc.cim"), coldmri::IoError);

  std::vector<char> extra = bytes;
  extra.push_back('x');
  spit(tmp.path / "extra.cim", extra);
  CHECK_THROWS_AS(coldmri::read_cim(tmp.path / "extra.cim"), coldmri::IoError);

  std::vector<char> badmagic = bytes;
  badmagic[0] = 'X';
  spit(tmp.path / "magic.cim", badmagic);
  CHECK_THROWS_AS(coldmri::read_cim(tmp.path / "magic.cim"), coldmri::IoError);

  CHECK_THROWS_AS(coldmri::read_cim(tmp.path / "missing.cim"), coldmri::IoError);
}

TEST_CASE("column masks round-trip") {
  TempDir tmp;
  const ColumnMask mask = coldmri::gen_task_mask(32, 4.0, 0.125, 9);
  const fs::path p = tmp.path / "m.kms";
  coldmri::write_mask(p, mask);
  const ColumnMask back = coldmri::read_mask(p);
  CHECK(back.same_selection(mask));
  CHECK(back.width() == mask.width());
  // Derived metadata: eight of thirty-two columns -> acceleration 4.
  CHECK(back.accel_factor() == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(back.center_fraction() >= 0.125 - 1e-12);

  std::vector<char> bytes = slurp(p);
  bytes.back() = 2;  // not 0/1
  spit(tmp.path / "bad.kms", bytes);
  CHECK_THROWS_AS(coldmri::read_mask(tmp.path / "bad.kms"), coldmri::IoError);
}

TEST_CASE("mask families round-trip and reject tampering") {
  TempDir tmp;
  const MaskFamily family = sample_family();
  const fs::path p = tmp.path / "f.kfm";
  coldmri::write_family(p, family);
  const MaskFamily back = coldmri::read_family(p);
  CHECK(back.width() == family.width());
  CHECK(back.total_steps() == family.total_steps());
  for (int t = 0; t <= family.total_steps(); ++t) {
    CHECK(back.mask(t).same_selection(family.mask(t)));
  }
  // A second save is byte-identical.
  coldmri::write_family(tmp.path / "f2.kfm", back);
  CHECK(slurp(p) == slurp(tmp.path / "f2.kfm"));

  // Flip one selection byte: nesting/count validation must fail.
  std::vector<char> bytes = slurp(p);
  const std::size_t header = 4 + 4 + 4 + 1 + 8 + 8;
  std::size_t flip = bytes.size() - 1;
  while (flip > header && bytes[flip] == 1) --flip;  // find a 0 byte in the masks
  REQUIRE(flip > header);
  bytes[flip] = 1;
  spit(tmp.path / "bad.kfm", bytes);
  CHECK_THROWS_AS(coldmri::read_family(tmp.path / "bad.kfm"), coldmri::IoError);
}

TEST_CASE("checkpoints round-trip parameters and metadata bit-exactly") {
  TempDir tmp;
  coldmri::ModelCheckpoint ckpt;
  ckpt.arch = {4, 2};
  ckpt.total_steps = 17;
  ckpt.params.resize(coldmri::param_count(ckpt.arch));
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    ckpt.params[i] = 0.001f * static_cast<float>(i) - 0.1f;
  }
  ckpt.metadata = {{"loss", "l1"}, {"width", "32"}};
  const fs::path p = tmp.path / "m.ckpt";
  coldmri::save_checkpoint(p, ckpt);
  const coldmri::ModelCheckpoint back = coldmri::load_checkpoint(p);
  CHECK(back.arch.channels == 4);
  CHECK(back.arch.depth == 2);
  CHECK(back.total_steps == 17);
  REQUIRE(back.params.size() == ckpt.params.size());
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    REQUIRE(back.params[i] == ckpt.params[i]);
  }
  REQUIRE(back.metadata.size() >= 2);
  bool saw_loss = false;
  for (const auto& [k, v] : back.metadata) {
    if (k == "loss") {
      saw_loss = true;
      CHECK(v == "l1");
    }
  }
  CHECK(saw_loss);

  // The loaded checkpoint drives a restorer.
  const coldmri::ConvRestorer model(back.arch, back.total_steps, back.params);
  CHECK(model.total_steps() == 17);

  std::vector<char> bytes = slurp(p);
  std::vector<char> truncated(bytes.begin(), bytes.end() - 1);
  spit(tmp.path / "bad.ckpt", truncated);
  CHECK_THROWS_AS(coldmri::load_checkpoint(tmp.path / "bad.ckpt"), coldmri::IoError);
}

TEST_CASE("PGM output uses the canonical binary header") {
  TempDir tmp;
  ComplexImage img(1, 2);
  img(0, 0) = 0.0;
  img(0, 1) = 2.0;  // peak; normalised to 255
  const fs::path p = tmp.path / "img.pgm";
  coldmri::write_pgm(p, img);
  const std::vector<char> bytes = slurp(p);
  const std::string want_header = "P5\n2 1\n255\n";
  REQUIRE(bytes.size() == want_header.size() + 2);
  CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(want_header.size())) ==
        want_header);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 2]) == 0);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 1]) == 255);
}

TEST_CASE("format_double emits shortest round-trippable decimals") {
  CHECK(coldmri::format_double(0.1) == "0.10000000000000001");
  CHECK(coldmri::format_double(1.0) == "1");
  CHECK(coldmri::format_double(1.0 / 3.0) == "0.33333333333333331");
  CHECK(coldmri::format_double(-2.5) == "-2.5");
}

TEST_CASE("manifest key-value files round-trip and reject malformed lines") {
  TempDir tmp;
  const std::vector<std::pair<std::string, std::string>> entries{
      {"seed", "7"}, {"accel", "4"}, {"note", "a=b allowed in values"}};
  const fs::path p = tmp.path / "run_manifest.txt";
  coldmri::write_manifest(p, entries, {"produced by a unit test"});
  const auto back = coldmri::read_kv_file(p);
  REQUIRE(back.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(back[i].first == entries[i].first);
    CHECK(back[i].second == entries[i].second);
  }

  std::ofstream bad(tmp.path / "bad.txt");
  bad << "# comment ok\nthis line has no separator\n";
  bad.close();
  CHECK_THROWS_AS(coldmri::read_kv_file(tmp.path / "bad.txt"), coldmri::IoError);
}

TEST_CASE("datasets save and load through the directory manifest") {
  TempDir tmp;
  const auto imgs = coldmri::make_phantom_set(8, 8, 3, 50);
  const fs::path dir = tmp.path / "data";
  coldmri::save_dataset(dir, imgs);
  CHECK(fs::exists(dir / "manifest.txt"));
  const coldmri::Dataset ds = coldmri::load_dataset(dir);
  REQUIRE(ds.images.size() == 3);
  REQUIRE(ds.ids.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(ds.images[i].same_shape_as(imgs[i]));
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        CHECK(ds.images[i](r, c).real() ==
              static_cast<double>(static_cast<float>(imgs[i](r, c).real())));
      }
    }
  }
  CHECK_THROWS_AS(coldmri::load_dataset(tmp.path / "nope"), coldmri::IoError);
}

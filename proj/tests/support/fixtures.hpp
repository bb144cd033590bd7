#pragma once

// Planted-truth fixtures shared by the evaluation tests and the acceptance
// binary. Expected counts come from the tags set at construction time, not
// from any matching code.

#include <string>
#include <vector>

#include "oracles.hpp"
#include "recd/dataset_io.hpp"
#include "recd/evaluation.hpp"

namespace fixture {

inline recd::SoftLabeledObject soft(const std::string& image, const recd::BBox& box, double p) {
  recd::SoftLabeledObject o{image, {}, box, {}, {}, 1, {}};
  o.label.p_hat = p;
  o.label.resolvable = true;
  o.label.n_valid = 11;
  return o;
}

inline std::string image_name(int i) {
  std::string s = std::to_string(i);
  return std::string(6 - s.size(), '0') + s;
}

enum class Kind { Matched, Misfitting, Overlooked, GtOnly };

struct PlantedBox {
  Kind kind;
  double p;
  double height;
  bool on_dontcare;
};

/// Objects sit in disjoint 100 px slots. A matched VGT box copies its GT box,
/// a misfitting one is shifted by 60% of its width off a GT box (IoU 0.25),
/// an overlooked one has nothing else in its slot.
struct Table3Fixture {
  recd::SoftLabelsByImage vgt;
  recd::LabelSet gt;
  std::vector<PlantedBox> planted;

  recd::ErrorCountReport expected(const recd::ErrorCountConfig& c) const {
    recd::ErrorCountReport r;
    r.config = c;
    for (const auto& b : planted) {
      if (b.kind != Kind::Overlooked) ++r.original_gt;
      if (b.kind == Kind::GtOnly) continue;
      if (b.p < c.p_threshold || b.height < c.min_height) continue;
      if (c.dontcare_excluded && b.on_dontcare) continue;
      ++r.validated;
      if (b.kind == Kind::Overlooked) ++r.overlooked;
      if (b.kind == Kind::Misfitting) ++r.misfitting;
    }
    r.fn_total = r.overlooked + r.misfitting;
    r.fnr = r.fn_total == 0 && r.original_gt == 0
                ? 0.0
                : double(r.fn_total) / double(r.fn_total + r.original_gt);
    return r;
  }
};

inline Table3Fixture table3_fixture(oracle::Rng& rng, int images) {
  static constexpr double kP[] = {0.3, 0.5, 0.6, 0.8, 0.95};
  static constexpr double kH[] = {12, 25, 30, 40, 60};
  Table3Fixture f;
  for (int i = 0; i < images; ++i) {
    const auto id = image_name(i);
    auto& gt = f.gt[id];
    auto& vgt = f.vgt[id];
    gt.push_back(recd::make_box_record("Car", recd::BBox(1200, 10, 1240, 40)));
    for (int slot = 0; slot < 11; ++slot) {
      PlantedBox b{static_cast<Kind>(rng.integer(0, 3)), kP[rng.integer(0, 4)],
                   kH[rng.integer(0, 4)], false};
      const double l = 100.0 * slot + 10.0;
      const double t = 100.0;
      const recd::BBox box(l, t, l + 30, t + b.height);
      switch (b.kind) {
        case Kind::Matched:
          gt.push_back(recd::make_box_record("Pedestrian", box));
          vgt.push_back(soft(id, box, b.p));
          break;
        case Kind::Misfitting:
          gt.push_back(recd::make_box_record("Pedestrian", box));
          vgt.push_back(soft(id, recd::BBox(l + 18, t, l + 48, t + b.height), b.p));
          break;
        case Kind::Overlooked:
          b.on_dontcare = rng.coin(0.4);
          if (b.on_dontcare) gt.push_back(recd::make_box_record("DontCare", box));
          vgt.push_back(soft(id, box, b.p));
          break;
        case Kind::GtOnly:
          gt.push_back(recd::make_box_record("Pedestrian", box));
          break;
      }
      f.planted.push_back(b);
    }
  }
  return f;
}

/// Images with original GT pedestrians and extra VGT-only pedestrians that
/// the original labels missed, all at least 25 px tall.
struct MissingBoxFixture {
  recd::LabelSet gt;
  recd::SoftLabelsByImage vgt;
  std::vector<recd::CandidateBox> missing;   // one candidate per VGT-only box
  std::vector<recd::CandidateBox> existing;  // candidates equal to GT boxes
};

inline MissingBoxFixture missing_box_fixture(oracle::Rng& rng, int images) {
  MissingBoxFixture f;
  for (int i = 0; i < images; ++i) {
    const auto id = image_name(i);
    auto& gt = f.gt[id];
    auto& vgt = f.vgt[id];
    for (int slot = 0; slot < 10; ++slot) {
      const double l = 120.0 * slot + 5.0;
      const double h = rng.uniform(30, 120);
      const recd::BBox box(l, 150, l + h * 0.4, 150 + h);
      const int kind = rng.integer(0, 2);
      if (kind == 0) continue;
      vgt.push_back(soft(id, box, rng.uniform(0.55, 1.0)));
      if (kind == 1) {
        gt.push_back(recd::make_box_record("Pedestrian", box));
        f.existing.push_back({id, box, rng.uniform(), std::nullopt});
      } else {
        f.missing.push_back({id, box, rng.uniform(), std::nullopt});
      }
    }
  }
  return f;
}

}  // namespace fixture

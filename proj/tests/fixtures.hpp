#pragma once

// Synthetic-label datasets built through the library pipeline.

#include <string>
#include <vector>

#include "oracles.hpp"
#include "pkw/dataset.hpp"
#include "pkw/rng.hpp"

namespace fixture {

// n feasible designs, each labeled by the synthetic oracle at every listed
// discharge (l/s); noise draws use a per-label derived seed.
inline pkw::DatasetManifest synthetic_manifest(std::size_t n, std::uint64_t seed,
                                               const std::vector<double>& q_lps = pkw::paper_schedule_lps(),
                                               double noise_sigma = 0.0) {
  pkw::DatasetManifest m;
  m.provenance.master_seed = seed;
  m.provenance.tool_version = "test";
  m.provenance.label_sources = "synthetic";
  const auto designs = oracle::feasible_designs(n, seed);
  pkw::OracleConfig cfg;
  cfg.noise_sigma = noise_sigma;
  std::uint64_t stream = 0;
  for (std::size_t i = 0; i < designs.size(); ++i) {
    const auto rec = pkw::make_record("g" + std::to_string(i), cfg.fixed, designs[i]);
    for (double q : q_lps) {
      pkw::LabeledSample l;
      l.geometry_id = rec.id;
      l.discharge = pkw::lps_to_m3s(q);
      l.cd = pkw::synthetic_cd(rec.derived, l.discharge, cfg, pkw::derive_seed(seed, stream++));
      l.source = pkw::LabelSource::Synthetic;
      m.add_label(l);
    }
    m.add_geometry({rec, "meshes/" + rec.id + ".stl", "clouds/" + rec.id + ".wnpc"});
  }
  return m;
}

}  // namespace fixture

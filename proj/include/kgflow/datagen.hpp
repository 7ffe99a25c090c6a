#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "kgflow/clinical.hpp"
#include "kgflow/common.hpp"
#include "kgflow/config.hpp"
#include "kgflow/knowledge_graph.hpp"

namespace kgflow {

// Synthetic clinical records. Each care action owns a disjoint signature set
// of observations and conditions; an encounter's items are drawn from its
// action's signature with probability p_sig and from the whole vocabulary
// otherwise, so p_sig sets how learnable the triage task is.
struct GenConfig {
  std::size_t patients = 60;
  double encounters_per_patient = 32.0;
  std::size_t observations = 153;
  std::size_t conditions = 107;
  std::size_t signature_observations = 12;  // per care action
  std::size_t signature_conditions = 8;     // per care action
  double p_sig = 0.7;
  std::size_t items_min = 3;
  std::size_t items_max = 8;
  // Canonical care-action order: wellness, inpatient, outpatient, ambulatory, emergency.
  std::array<double, kCareActionCount> prior = {0.45, 0.10, 0.15, 0.25, 0.05};
  std::uint64_t seed = 1;

  void validate() const {
    if (!(p_sig >= 0.0 && p_sig <= 1.0)) throw Error("gen config: p_sig must lie in [0, 1]");
    double sum = 0.0;
    for (double p : prior) {
      if (!(p >= 0.0 && p <= 1.0)) throw Error("gen config: prior probabilities must lie in [0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error("gen config: prior must sum to 1");
    if (kCareActionCount * signature_observations > observations ||
        kCareActionCount * signature_conditions > conditions) {
      throw Error("gen config: signature sets do not fit disjointly in the vocabulary");
    }
    if (p_sig > 0.0 && signature_observations + signature_conditions == 0) {
      throw Error("gen config: p_sig > 0 needs non-empty signature sets");
    }
    if (observations + conditions == 0) throw Error("gen config: empty item vocabulary");
    if (items_min < 1 || items_max < items_min) throw Error("gen config: need 1 <= items_min <= items_max");
    if (!(encounters_per_patient >= 1.0)) throw Error("gen config: encounters_per_patient must be >= 1");
  }

  void read(KeyValueConfig& kv) {
    kv.read("patients", patients);
    kv.read("encounters_per_patient", encounters_per_patient);
    kv.read("observations", observations);
    kv.read("conditions", conditions);
    kv.read("signature_observations", signature_observations);
    kv.read("signature_conditions", signature_conditions);
    kv.read("p_sig", p_sig);
    kv.read("items_min", items_min);
    kv.read("items_max", items_max);
    kv.read("gen_seed", seed);
    std::vector<double> p;
    kv.read_list("prior", p);
    if (!p.empty()) {
      if (p.size() != kCareActionCount) throw Error("gen config: prior needs 5 comma-separated values");
      std::copy(p.begin(), p.end(), prior.begin());
    }
  }
};

namespace detail {
inline std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%0*zu", prefix, width, i);
  return buf;
}
}  // namespace detail

inline std::string observation_name(std::size_t i) { return detail::numbered("observation", i, 3); }
inline std::string condition_name(std::size_t i) { return detail::numbered("condition", i, 3); }

// Triple rows in kg-core format, positive links only.
inline std::vector<TripleRow> generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  namespace c = clinical;
  Rng rng(cfg.seed);

  // Vocabulary items 0..observations-1 are observations, the rest conditions.
  auto item_row = [&](const std::string& encounter, std::size_t item) {
    if (item < cfg.observations) {
      return TripleRow{encounter, std::string(c::kEncounterObservation), observation_name(item),
                       std::string(c::kEncounter), std::string(c::kObservation), true};
    }
    return TripleRow{encounter, std::string(c::kEncounterCondition), condition_name(item - cfg.observations),
                     std::string(c::kEncounter), std::string(c::kCondition), true};
  };

  std::array<std::vector<std::size_t>, kCareActionCount> signature;
  for (std::size_t a = 0; a < kCareActionCount; ++a) {
    for (std::size_t k = 0; k < cfg.signature_observations; ++k) {
      signature[a].push_back(a * cfg.signature_observations + k);
    }
    for (std::size_t k = 0; k < cfg.signature_conditions; ++k) {
      signature[a].push_back(cfg.observations + a * cfg.signature_conditions + k);
    }
  }
  const std::vector<double> prior(cfg.prior.begin(), cfg.prior.end());
  const std::size_t vocab = cfg.observations + cfg.conditions;

  std::vector<TripleRow> rows;
  std::size_t encounter_index = 0;
  for (std::size_t p = 0; p < cfg.patients; ++p) {
    const std::string patient = detail::numbered("patient", p, 4);
    const std::size_t n_enc = 1 + rng.poisson(cfg.encounters_per_patient - 1.0);
    for (std::size_t k = 0; k < n_enc; ++k) {
      const std::string encounter = detail::numbered("encounter", encounter_index++, 6);
      const auto action = static_cast<CareAction>(rng.categorical(prior));
      rows.push_back({patient, std::string(c::kPatientEncounter), encounter, std::string(c::kPatient),
                      std::string(c::kEncounter), true});
      rows.push_back({encounter, std::string(c::kEncounterCareAction), std::string(care_action_name(action)),
                      std::string(c::kEncounter), std::string(c::kCareAction), true});
      const auto& sig = signature[index_of(action)];
      const auto draws = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(cfg.items_min),
                                                              static_cast<std::int64_t>(cfg.items_max)));
      std::vector<std::size_t> items;
      for (std::size_t t = 0; t < draws; ++t) {
        const std::size_t item = (!sig.empty() && rng.bernoulli(cfg.p_sig)) ? sig[rng.below(sig.size())]
                                                                            : rng.below(vocab);
        if (std::find(items.begin(), items.end(), item) == items.end()) items.push_back(item);
      }
      for (std::size_t item : items) rows.push_back(item_row(encounter, item));
    }
  }
  return rows;
}

inline void write_triple_rows(std::ostream& out, const std::vector<TripleRow>& rows) {
  out << kTripleTableHeader << '\n';
  for (const auto& r : rows) {
    csv::write_row(out, {r.subject, r.relation, r.object, r.subject_type, r.object_type,
                         r.positive ? "True" : "False"});
  }
}

}  // namespace kgflow

// SPDX-License-Identifier: Apache-2.0
#include "recap/evaluation.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace recap {

std::size_t rank_target(std::span<const double> logits, PoiIndex target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size())
    throw std::out_of_range("rank_target: target outside logits");
  const double t = logits[static_cast<std::size_t>(target)];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i] > t || (logits[i] == t && i < static_cast<std::size_t>(target))) ++rank;
  }
  return rank;
}

CutoffMetrics metrics(std::span<const std::size_t> ranks, int cutoff) {
  CutoffMetrics m;
  if (ranks.empty()) return m;
  m.empty = false;
  for (std::size_t r : ranks) {
    if (r < 1) throw std::invalid_argument("metrics: rank must be >= 1");
    if (r <= static_cast<std::size_t>(cutoff)) {
      m.hr += 1.0;
      m.ndcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
    m.mrr += 1.0 / static_cast<double>(r);
  }
  const double n = static_cast<double>(ranks.size());
  m.hr /= n;
  m.ndcg /= n;
  m.mrr /= n;
  return m;
}

MetricSummary summarize(std::span<const std::size_t> ranks) {
  MetricSummary s;
  s.count = ranks.size();
  if (ranks.empty()) return s;
  for (int k : kReportCutoffs) {
    const CutoffMetrics m = metrics(ranks, k);
    s.hr[k] = m.hr;
    s.ndcg[k] = m.ndcg;
    s.mrr = m.mrr;
  }
  return s;
}

MetricSummary summarize_subset(std::span<const std::size_t> ranks, std::span<const std::size_t> rows) {
  std::vector<std::size_t> picked;
  picked.reserve(rows.size());
  for (std::size_t r : rows) picked.push_back(ranks[r]);
  return summarize(picked);
}

HeadTailSplit head_tail_split(std::span<const PredictionInstance> instances,
                              const TransitionStore& store, int eta) {
  HeadTailSplit split;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::int64_t m = store.count(instances[i].source, instances[i].target);
    if (m <= eta) {
      split.tail.push_back(i);
      if (m == 0) split.unseen.push_back(i);
    } else {
      split.head.push_back(i);
    }
  }
  return split;
}

int frequency_bin(std::int64_t m) {
  if (m < 0) throw std::invalid_argument("frequency_bin: negative count");
  return static_cast<int>(std::min<std::int64_t>(m, kFrequencyBins - 1));
}

std::vector<FrequencyBin> frequency_bin_report(std::span<const PredictionInstance> instances,
                                               const TransitionStore& store,
                                               std::span<const std::size_t> ranks) {
  std::vector<std::vector<std::size_t>> members(kFrequencyBins);
  for (std::size_t i = 0; i < instances.size(); ++i)
    members[static_cast<std::size_t>(frequency_bin(store.count(instances[i].source, instances[i].target)))]
        .push_back(i);
  std::vector<FrequencyBin> bins(kFrequencyBins);
  for (int b = 0; b < kFrequencyBins; ++b) {
    auto& bin = bins[static_cast<std::size_t>(b)];
    bin.label = b == kFrequencyBins - 1 ? std::to_string(b) + "+" : std::to_string(b);
    const auto& rows = members[static_cast<std::size_t>(b)];
    bin.count = rows.size();
    if (rows.empty()) continue;
    const MetricSummary s = summarize_subset(ranks, rows);
    bin.hr1 = s.hr.at(1);
    bin.hr20 = s.hr.at(20);
  }
  return bins;
}

double TailShare::unique_tail_fraction() const {
  return unique_pairs ? static_cast<double>(unique_tail_pairs) / static_cast<double>(unique_pairs) : 0.0;
}

double TailShare::instance_tail_fraction() const {
  return instances ? static_cast<double>(tail_instances) / static_cast<double>(instances) : 0.0;
}

TailShare tail_share(std::span<const PredictionInstance> instances, const TransitionStore& store, int eta) {
  TailShare share;
  std::set<std::pair<PoiIndex, PoiIndex>> seen;
  for (const auto& inst : instances) {
    const std::int64_t m = store.count(inst.source, inst.target);
    ++share.instances;
    if (m <= eta) ++share.tail_instances;
    if (m == 0) ++share.unseen_instances;
    if (seen.emplace(inst.source, inst.target).second) {
      ++share.unique_pairs;
      if (m <= eta) ++share.unique_tail_pairs;
      if (m == 0) ++share.unique_unseen_pairs;
    }
  }
  return share;
}

EvalReport build_report(std::span<const PredictionInstance> instances, const TransitionStore& store,
                        std::span<const std::size_t> ranks, int eta) {
  if (ranks.size() != instances.size()) throw std::invalid_argument("build_report: ranks/instances size mismatch");
  EvalReport report;
  report.eta = eta;
  report.overall = summarize(ranks);
  const HeadTailSplit split = head_tail_split(instances, store, eta);
  report.head = summarize_subset(ranks, split.head);
  report.tail = summarize_subset(ranks, split.tail);
  report.unseen = summarize_subset(ranks, split.unseen);
  report.share = tail_share(instances, store, eta);
  report.bins = frequency_bin_report(instances, store, ranks);
  return report;
}

namespace {

nlohmann::json summary_to_json(const MetricSummary& s) {
  nlohmann::json j;
  j["count"] = s.count;
  j["empty"] = s.empty();
  if (s.empty()) {
    j["mrr"] = nullptr;
    return j;
  }
  for (int k : kReportCutoffs) {
    j["hr@" + std::to_string(k)] = s.hr.at(k);
    j["ndcg@" + std::to_string(k)] = s.ndcg.at(k);
  }
  j["mrr"] = s.mrr;
  return j;
}

MetricSummary summary_from_json(const nlohmann::json& j) {
  MetricSummary s;
  s.count = j.at("count").get<std::size_t>();
  if (s.count == 0) return s;
  for (int k : kReportCutoffs) {
    s.hr[k] = j.at("hr@" + std::to_string(k)).get<double>();
    s.ndcg[k] = j.at("ndcg@" + std::to_string(k)).get<double>();
  }
  s.mrr = j.at("mrr").get<double>();
  return s;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("-"); }

}  // namespace

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["eta"] = r.eta;
  j["overall"] = summary_to_json(r.overall);
  j["head"] = summary_to_json(r.head);
  j["tail"] = summary_to_json(r.tail);
  j["unseen"] = summary_to_json(r.unseen);
  j["tail_share"] = {
      {"unique_pairs", r.share.unique_pairs},
      {"unique_tail_pairs", r.share.unique_tail_pairs},
      {"unique_unseen_pairs", r.share.unique_unseen_pairs},
      {"unique_tail_fraction", r.share.unique_tail_fraction()},
      {"instances", r.share.instances},
      {"tail_instances", r.share.tail_instances},
      {"unseen_instances", r.share.unseen_instances},
      {"instance_tail_fraction", r.share.instance_tail_fraction()},
  };
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : r.bins) {
    nlohmann::json jb = {{"bin", b.label}, {"count", b.count}};
    jb["hr@1"] = b.hr1 ? nlohmann::json(*b.hr1) : nlohmann::json(nullptr);
    jb["hr@20"] = b.hr20 ? nlohmann::json(*b.hr20) : nlohmann::json(nullptr);
    bins.push_back(jb);
  }
  j["frequency_bins"] = bins;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.eta = j.at("eta").get<int>();
  r.overall = summary_from_json(j.at("overall"));
  r.head = summary_from_json(j.at("head"));
  r.tail = summary_from_json(j.at("tail"));
  r.unseen = summary_from_json(j.at("unseen"));
  const auto& ts = j.at("tail_share");
  r.share.unique_pairs = ts.at("unique_pairs").get<std::size_t>();
  r.share.unique_tail_pairs = ts.at("unique_tail_pairs").get<std::size_t>();
  r.share.unique_unseen_pairs = ts.at("unique_unseen_pairs").get<std::size_t>();
  r.share.instances = ts.at("instances").get<std::size_t>();
  r.share.tail_instances = ts.at("tail_instances").get<std::size_t>();
  r.share.unseen_instances = ts.at("unseen_instances").get<std::size_t>();
  for (const auto& jb : j.at("frequency_bins")) {
    FrequencyBin b;
    b.label = jb.at("bin").get<std::string>();
    b.count = jb.at("count").get<std::size_t>();
    if (!jb.at("hr@1").is_null()) b.hr1 = jb.at("hr@1").get<double>();
    if (!jb.at("hr@20").is_null()) b.hr20 = jb.at("hr@20").get<double>();
    r.bins.push_back(b);
  }
  return r;
}

std::string report_to_text(const EvalReport& r) {
  std::ostringstream os;
  auto row = [&os](const std::string& name, const MetricSummary& s) {
    os << std::left << std::setw(10) << name << std::right << std::setw(8) << s.count;
    if (s.empty()) {
      for (int i = 0; i < 4; ++i) os << std::setw(9) << "-";
    } else {
      os << std::setw(9) << fmt(s.hr.at(1)) << std::setw(9) << fmt(s.hr.at(20)) << std::setw(9)
         << fmt(s.ndcg.at(20)) << std::setw(9) << fmt(s.mrr);
    }
    os << '\n';
  };
  os << std::left << std::setw(10) << "group" << std::right << std::setw(8) << "count" << std::setw(9)
     << "H@1" << std::setw(9) << "H@20" << std::setw(9) << "N@20" << std::setw(9) << "MRR" << '\n';
  row("overall", r.overall);
  row("head", r.head);
  row("tail", r.tail);
  row("unseen", r.unseen);
  os << '\n'
     << "tail (eta=" << r.eta << "): " << fmt(r.share.unique_tail_fraction()) << " of "
     << r.share.unique_pairs << " unique pairs, " << fmt(r.share.instance_tail_fraction()) << " of "
     << r.share.instances << " instances\n\n";
  os << std::left << std::setw(6) << "m" << std::right << std::setw(8) << "count" << std::setw(9) << "H@1"
     << std::setw(9) << "H@20" << '\n';
  for (const auto& b : r.bins)
    os << std::left << std::setw(6) << b.label << std::right << std::setw(8) << b.count << std::setw(9)
       << fmt(b.hr1) << std::setw(9) << fmt(b.hr20) << '\n';
  return os.str();
}

std::string bins_to_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "bin,count,hr1,hr20\n";
  os << std::setprecision(10);
  for (const auto& b : r.bins) {
    os << b.label << ',' << b.count << ',';
    if (b.hr1) os << *b.hr1;
    os << ',';
    if (b.hr20) os << *b.hr20;
    os << '\n';
  }
  return os.str();
}

}  // namespace recap

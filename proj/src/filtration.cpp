#include "followup/filtration.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include "followup/kmeans.hpp"
#include "followup/text.hpp"

namespace followup {

std::string_view to_string(RemovalReason r) {
  return r == RemovalReason::redundant ? "redundant" : "not_top_k";
}

std::size_t default_cluster_count(std::size_t pool_size) {
  if (pool_size == 0) return 1;
  return std::clamp<std::size_t>((pool_size + 4) / 5, 1, pool_size);
}

namespace {

const PromptKit& kit(const FiltrationOptions& o) { return o.prompts ? *o.prompts : PromptKit::shared(); }

// Numbered list from the model, or nullopt after one retry on empty / list-free output.
std::optional<std::vector<std::string>> ask_list(PromptTemplateId id, const std::string& prompt,
                                                 Gateway& gateway, const FiltrationOptions& o) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      auto items = parse_numbered_list(gateway.complete(id, prompt, o.temperature, o.max_tokens).text);
      if (!items.empty()) return items;
    } catch (const EmptyCompletionError&) {
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<QuestionCluster> cluster_questions(const QuestionSet& pool, std::size_t n_clusters,
                                               std::uint64_t seed, Gateway& gateway) {
  if (pool.empty()) throw ValidationError("cannot cluster an empty pool");
  if (n_clusters < 1 || n_clusters > pool.size())
    throw ValidationError("n_clusters " + std::to_string(n_clusters) + " outside [1, " +
                          std::to_string(pool.size()) + "]");
  auto vectors = gateway.embed(pool.texts());
  std::vector<std::vector<double>> points;
  points.reserve(vectors.size());
  for (auto& v : vectors) points.push_back(std::move(v.values));

  auto km = kmeans(points, n_clusters, seed);
  std::vector<QuestionCluster> clusters(n_clusters);
  for (std::size_t c = 0; c < n_clusters; ++c) {
    clusters[c].cluster_id = static_cast<int>(c);
    clusters[c].centroid.values = km.centroids[c];
  }
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto& cl = clusters[km.assignment[i]];
    cl.members.add(pool.items()[i], pool.provenance()[i]);
    cl.pool_indices.push_back(i);
  }
  return clusters;
}

DedupResult deduplicate_cluster(const QuestionCluster& cluster, Gateway& gateway,
                                const FiltrationOptions& options) {
  if (cluster.members.empty()) throw ValidationError("cannot de-duplicate an empty cluster");
  DedupResult out;
  const auto& members = cluster.members.items();
  if (members.size() == 1) {
    out.questions = members;
    return out;
  }
  const std::string prompt = kit(options).render(
      PromptTemplateId::redundant_filter,
      {{"questions", text::format_numbered_list(cluster.members.texts())}});
  auto items = ask_list(PromptTemplateId::redundant_filter, prompt, gateway, options);
  const std::string who = "cluster " + std::to_string(cluster.cluster_id);
  if (!items) {
    out.warnings.push_back(who + ": no usable de-duplication output; kept the cluster unchanged");
    out.questions = members;
    out.passthrough = true;
    return out;
  }
  if (items->size() > members.size()) {
    out.warnings.push_back(who + ": de-duplication returned " + std::to_string(items->size()) +
                           " questions for " + std::to_string(members.size()) +
                           "; kept the cluster unchanged");
    out.questions = members;
    out.passthrough = true;
    return out;
  }
  std::unordered_set<std::string> seen;
  for (auto& t : *items) {
    Question q(t);
    if (seen.insert(q.normalized()).second) out.questions.push_back(std::move(q));
  }
  return out;
}

TopKResult select_top_k(const PatientMessage& message, const QuestionSet& questions, int k,
                        Gateway& gateway, const FiltrationOptions& options) {
  if (k < 1) throw ValidationError("top-k: k must be >= 1");
  if (questions.empty()) throw ValidationError("top-k: no questions to select from");
  TopKResult out;
  const auto limit = static_cast<std::size_t>(k);
  if (questions.size() <= limit) {
    out.selected = questions;
    return out;
  }

  const std::string prompt =
      kit(options).render(PromptTemplateId::top_k, {{"msg", message.text()},
                                                    {"questions", text::format_numbered_list(questions.texts())},
                                                    {"k", std::to_string(k)}});
  out.model_called = true;
  std::vector<std::size_t> picked;
  for (int attempt = 0; attempt < 2 && picked.empty(); ++attempt) {
    out.dropped.clear();
    auto items = ask_list(PromptTemplateId::top_k, prompt, gateway, options);
    if (!items) break;
    std::unordered_set<std::size_t> taken;
    for (const auto& item : *items) {
      auto idx = questions.find(normalize_question(item));
      if (!idx) {
        out.dropped.push_back(item);
        continue;
      }
      if (picked.size() < limit && taken.insert(*idx).second) picked.push_back(*idx);
    }
  }
  for (const auto& d : out.dropped)
    out.warnings.push_back("top-k: dropped selection not in the input list: " + d);
  if (picked.empty()) {
    out.fell_back = true;
    out.warnings.push_back("top-k: no valid selection after one retry; kept the first " +
                           std::to_string(k) + " questions");
    for (std::size_t i = 0; i < limit; ++i) picked.push_back(i);
  }
  std::sort(picked.begin(), picked.end());
  for (auto i : picked) out.selected.add(questions.items()[i], questions.provenance()[i]);
  return out;
}

FilterResult filter_pipeline(const PatientMessage& message, const QuestionSet& pool, int target_k,
                             std::uint64_t seed, Gateway& gateway,
                             const FiltrationOptions& options) {
  if (pool.empty()) throw ValidationError("filtration: pool is empty");
  if (target_k < 1) throw ValidationError("filtration: target k must be >= 1");
  FilterResult result;
  auto& report = result.report;
  report.input_size = pool.size();
  report.target_k = target_k;

  const std::size_t n_clusters = options.n_clusters
                                     ? std::clamp<std::size_t>(*options.n_clusters, 1, pool.size())
                                     : default_cluster_count(pool.size());
  auto clusters = cluster_questions(pool, n_clusters, seed, gateway);
  report.cluster_count = clusters.size();

  auto deduped = parallel_map(clusters.size(), gateway.concurrency(),
                              [&](std::size_t c) { return deduplicate_cluster(clusters[c], gateway, options); });

  // Survivors keep their pool position; rewritten questions sit at their cluster's first position.
  struct Placed {
    std::size_t anchor;
    std::size_t cluster_rank;
    std::size_t order;
    Question question;
    QuestionProvenance provenance;
  };
  std::vector<Placed> placed;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& cl = clusters[c];
    const std::size_t first = cl.pool_indices.front();
    for (std::size_t j = 0; j < deduped[c].questions.size(); ++j) {
      const Question& q = deduped[c].questions[j];
      if (auto m = cl.members.find(q.normalized())) {
        placed.push_back({cl.pool_indices[*m], 0, j, cl.members.items()[*m], cl.members.provenance()[*m]});
      } else {
        placed.push_back({first, 1, j, q, cl.members.provenance().front()});
      }
    }
    report.warnings.insert(report.warnings.end(), deduped[c].warnings.begin(),
                           deduped[c].warnings.end());
  }
  std::stable_sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) {
    return std::tie(a.anchor, a.cluster_rank, a.order) < std::tie(b.anchor, b.cluster_rank, b.order);
  });
  QuestionSet filtered;
  for (auto& p : placed) filtered.add(std::move(p.question), std::move(p.provenance));
  report.post_dedup_size = filtered.size();
  for (const auto& q : pool.items()) {
    if (!filtered.contains(q.normalized())) report.removed.push_back({q.text(), RemovalReason::redundant});
  }

  auto top = select_top_k(message, filtered, target_k, gateway, options);
  report.warnings.insert(report.warnings.end(), top.warnings.begin(), top.warnings.end());
  for (const auto& q : filtered.items()) {
    if (!top.selected.contains(q.normalized())) report.removed.push_back({q.text(), RemovalReason::not_top_k});
  }
  result.questions = std::move(top.selected);
  report.final_size = result.questions.size();
  return result;
}

}  // namespace followup

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "followup/domain.hpp"
#include "followup/gateway.hpp"
#include "followup/prompts.hpp"

namespace followup {

struct QuestionCluster {
  int cluster_id = 0;
  QuestionSet members;                    // in pool order
  std::vector<std::size_t> pool_indices;  // parallel to members
  EmbeddingVector centroid;
};

enum class RemovalReason { redundant, not_top_k };

std::string_view to_string(RemovalReason r);

struct Removal {
  std::string question;
  RemovalReason reason = RemovalReason::redundant;

  bool operator==(const Removal&) const = default;
};

struct FiltrationReport {
  std::size_t input_size = 0;
  std::size_t post_dedup_size = 0;
  std::size_t final_size = 0;
  std::size_t cluster_count = 0;
  int target_k = 0;
  std::vector<Removal> removed;
  std::vector<std::string> warnings;
};

struct DedupResult {
  std::vector<Question> questions;
  /// True when the cluster came back unchanged because the model output was unusable.
  bool passthrough = false;
  std::vector<std::string> warnings;
};

struct TopKResult {
  QuestionSet selected;
  /// Model selections that matched no input question.
  std::vector<std::string> dropped;
  std::vector<std::string> warnings;
  bool model_called = false;
  bool fell_back = false;
};

struct FilterResult {
  QuestionSet questions;
  FiltrationReport report;
};

struct FiltrationOptions {
  double temperature = 0.6;
  int max_tokens = 1024;
  /// Overrides the ceil(|pool| / 5) cluster count.
  std::optional<std::size_t> n_clusters;
  const PromptKit* prompts = nullptr;  // defaults to PromptKit::shared()
};

/// ceil(pool_size / 5), clamped to [1, pool_size].
std::size_t default_cluster_count(std::size_t pool_size);

/// Embeds the pool and partitions it with seeded k-means. Clusters are ordered by id;
/// an id's members keep pool order.
std::vector<QuestionCluster> cluster_questions(const QuestionSet& pool, std::size_t n_clusters,
                                               std::uint64_t seed, Gateway& gateway);

/// Asks the model to reduce a cluster to atomic questions. Singletons pass straight through.
/// Unusable or over-long output returns the cluster unchanged with a warning.
DedupResult deduplicate_cluster(const QuestionCluster& cluster, Gateway& gateway,
                                const FiltrationOptions& options = {});

/// Picks at most k questions. Selections must match an input question by normalized form;
/// the result keeps input order. With |questions| <= k the model is not called.
TopKResult select_top_k(const PatientMessage& message, const QuestionSet& questions, int k,
                        Gateway& gateway, const FiltrationOptions& options = {});

/// Cluster, de-duplicate per cluster, union, then top-k.
FilterResult filter_pipeline(const PatientMessage& message, const QuestionSet& pool, int target_k,
                             std::uint64_t seed, Gateway& gateway,
                             const FiltrationOptions& options = {});

}  // namespace followup

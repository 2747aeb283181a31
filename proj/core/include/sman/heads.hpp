#pragma once

#include "sman/attention.hpp"

namespace sman {

// softmax(X W + b) row-wise; X is n x d, W is d x 3.
Node publisher_credibility(Node publisher_reps, Node weight, Node bias);
Node user_credibility(Node user_reps, Node weight, Node bias);

// alpha = softmax over unmasked slots of news_row * slot_reps^T;
// result = alpha * slot_reps. slot_mask is 1 x K with 0 at PAD slots; an
// all-PAD row yields zeros.
Node aggregate_reposters(Node news_row, Node slot_reps, const Matrix& slot_mask);

// [p; r; p*r; p-r] W_F + b_F, row-wise.
Node fuse(Node publisher, Node reposters, Node weight, Node bias);

// softmax([content; graph] W_m + b).
Node classify_news(Node content, Node graph_feature, Node weight, Node bias);

}  // namespace sman

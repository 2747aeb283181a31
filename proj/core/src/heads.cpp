#include "sman/heads.hpp"

#include "sman/errors.hpp"

namespace sman {

namespace {

Node credibility_head(Node reps, Node weight, Node bias, const char* what) {
  if (weight.rows() != reps.cols()) throw ShapeError(std::string(what) + ": weight rows must equal d");
  return ad::softmax_rows(ad::add_bias(ad::matmul(reps, weight), bias));
}

}  // namespace

Node publisher_credibility(Node publisher_reps, Node weight, Node bias) {
  return credibility_head(publisher_reps, weight, bias, "publisher_credibility");
}

Node user_credibility(Node user_reps, Node weight, Node bias) {
  return credibility_head(user_reps, weight, bias, "user_credibility");
}

Node aggregate_reposters(Node news_row, Node slot_reps, const Matrix& slot_mask) {
  if (news_row.rows() != 1 || news_row.cols() != slot_reps.cols()) {
    throw ShapeError("aggregate_reposters: news row must be 1 x d");
  }
  if (slot_mask.rank() != 2 || slot_mask.rows() != 1 || slot_mask.cols() != slot_reps.rows()) {
    throw ShapeError("aggregate_reposters: slot mask must be 1 x K");
  }
  auto scores = ad::matmul(news_row, slot_reps, false, true);
  auto alpha = ad::masked_softmax_rows(scores, slot_mask);
  return ad::matmul(alpha, slot_reps);
}

Node fuse(Node publisher, Node reposters, Node weight, Node bias) {
  if (publisher.shape() != reposters.shape()) throw ShapeError("fuse: publisher and reposter shapes differ");
  if (weight.rows() != 4 * publisher.cols()) throw ShapeError("fuse: weight must be 4d x d");
  std::vector<Node> parts{publisher, reposters, ad::mul(publisher, reposters), ad::sub(publisher, reposters)};
  return ad::add_bias(ad::matmul(ad::concat_cols<Real>(parts), weight), bias);
}

Node classify_news(Node content, Node graph_feature, Node weight, Node bias) {
  if (content.rows() != graph_feature.rows()) throw ShapeError("classify_news: row counts differ");
  if (content.cols() != 3 * graph_feature.cols()) {
    throw ShapeError("classify_news: content width " + std::to_string(content.cols()) + " must be 3 x " +
                     std::to_string(graph_feature.cols()));
  }
  if (weight.rows() != content.cols() + graph_feature.cols()) {
    throw ShapeError("classify_news: weight must be 4d x classes");
  }
  std::vector<Node> parts{content, graph_feature};
  return ad::softmax_rows(ad::add_bias(ad::matmul(ad::concat_cols<Real>(parts), weight), bias));
}

}  // namespace sman

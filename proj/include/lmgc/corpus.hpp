#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "error.hpp"
#include "lexicon.hpp"
#include "util.hpp"

namespace lmgc {

struct CorpusToken {
  std::string surface;
  std::optional<std::string> lemma;
  std::optional<PartOfSpeech> pos;
  std::optional<std::string> instance_id;

  bool is_instance() const noexcept { return instance_id.has_value(); }
  friend bool operator==(const CorpusToken&, const CorpusToken&) = default;
};

struct WsdSentence {
  std::string sentence_id;
  std::vector<CorpusToken> tokens;
  friend bool operator==(const WsdSentence&, const WsdSentence&) = default;
};

struct InstanceRef {
  std::size_t sentence = 0;
  std::size_t token = 0;
  friend bool operator==(const InstanceRef&, const InstanceRef&) = default;
};

/// An annotated corpus. `instance_order` lists instance ids in document
/// order; `instance_index` locates each one.
class WsdCorpus {
public:
  WsdCorpus() = default;
  explicit WsdCorpus(std::string name) : name_(std::move(name)) {}

  void add_sentence(WsdSentence sentence) {
    const std::size_t s = sentences_.size();
    for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
      const auto& id = sentence.tokens[t].instance_id;
      if (!id) continue;
      if (!index_.emplace(*id, InstanceRef{s, t}).second) throw Error(ErrorKind::DuplicateInstanceId, *id);
      order_.push_back(*id);
    }
    sentences_.push_back(std::move(sentence));
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<WsdSentence>& sentences() const noexcept { return sentences_; }
  const std::vector<std::string>& instance_order() const noexcept { return order_; }
  std::size_t instance_count() const noexcept { return order_.size(); }

  std::optional<InstanceRef> locate(const std::string& instance_id) const {
    auto it = index_.find(instance_id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const CorpusToken& token(InstanceRef ref) const { return sentences_.at(ref.sentence).tokens.at(ref.token); }

  friend bool operator==(const WsdCorpus& a, const WsdCorpus& b) {
    return a.name_ == b.name_ && a.sentences_ == b.sentences_;
  }

private:
  std::string name_;
  std::vector<WsdSentence> sentences_;
  std::unordered_map<std::string, InstanceRef> index_;
  std::vector<std::string> order_;
};

using GoldKeys = std::map<std::string, std::set<std::string>>;

namespace detail {

using boost::property_tree::ptree;

inline std::optional<std::string> xml_attr(const ptree& node, const char* name) {
  auto attrs = node.get_child_optional("<xmlattr>");
  if (!attrs) return std::nullopt;
  auto v = attrs->get_optional<std::string>(name);
  return v ? std::optional<std::string>(*v) : std::nullopt;
}

inline std::string require_attr(const ptree& node, const char* element, const char* name) {
  auto v = xml_attr(node, name);
  if (!v) throw Error(ErrorKind::MissingAttribute, std::string("<") + element + "> lacks '" + name + "'");
  return *v;
}

inline void collect_sentences(const ptree& node, WsdCorpus& corpus) {
  for (const auto& [tag, child] : node) {
    if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
    if (tag != "sentence") {
      collect_sentences(child, corpus);
      continue;
    }
    WsdSentence sentence;
    sentence.sentence_id = xml_attr(child, "id").value_or("s" + std::to_string(corpus.sentences().size()));
    for (const auto& [ttag, tok] : child) {
      if (ttag != "wf" && ttag != "instance") continue;
      CorpusToken t;
      t.surface = tok.data();
      if (ttag == "instance") {
        t.instance_id = require_attr(tok, "instance", "id");
        t.lemma = require_attr(tok, "instance", "lemma");
        t.pos = parse_pos_tag(require_attr(tok, "instance", "pos"));
      } else {
        t.lemma = xml_attr(tok, "lemma");
        if (auto p = xml_attr(tok, "pos")) t.pos = parse_pos_tag(*p);
      }
      sentence.tokens.push_back(std::move(t));
    }
    if (!sentence.tokens.empty()) corpus.add_sentence(std::move(sentence));
  }
}

inline std::string corpus_name_from_path(const std::string& path) {
  std::string stem = std::filesystem::path(path).filename().string();
  for (const char* suffix : {".data.xml", ".xml"}) {
    if (stem.ends_with(suffix)) {
      stem.resize(stem.size() - std::string_view(suffix).size());
      break;
    }
  }
  return stem;
}

}  // namespace detail

/// Parses the all-words framework XML (corpus/text/sentence/{wf,instance}).
/// A bare <sentence> root is accepted as well.
inline WsdCorpus parse_framework_xml(const std::string& xml, std::string name) {
  detail::ptree tree;
  std::istringstream in(xml);
  try {
    boost::property_tree::read_xml(in, tree);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw Error(ErrorKind::XmlSyntaxError, name + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  if (auto root = tree.get_child_optional("corpus")) {
    if (auto source = detail::xml_attr(*root, "source"); source && name.empty()) name = *source;
  }
  WsdCorpus corpus(std::move(name));
  detail::collect_sentences(tree, corpus);
  return corpus;
}

inline WsdCorpus load_framework_xml(const std::string& path) {
  return parse_framework_xml(read_file(path), detail::corpus_name_from_path(path));
}

namespace detail {
inline std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}
}  // namespace detail

/// Writes the corpus in the framework XML layout, one <text> holding every
/// sentence.
inline std::string export_framework_xml(const WsdCorpus& corpus) {
  using detail::xml_escape;
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\" ?>\n";
  out += "<corpus lang=\"en\" source=\"" + xml_escape(corpus.name()) + "\">\n<text id=\"d000\">\n";
  for (const auto& s : corpus.sentences()) {
    out += "<sentence id=\"" + xml_escape(s.sentence_id) + "\">\n";
    for (const auto& t : s.tokens) {
      std::string attrs;
      if (t.instance_id) attrs += " id=\"" + xml_escape(*t.instance_id) + "\"";
      if (t.lemma) attrs += " lemma=\"" + xml_escape(*t.lemma) + "\"";
      if (t.pos) attrs += " pos=\"" + std::string(pos_tag(*t.pos)) + "\"";
      const char* tag = t.instance_id ? "instance" : "wf";
      out += std::string("<") + tag + attrs + ">" + xml_escape(t.surface) + "</" + tag + ">\n";
    }
    out += "</sentence>\n";
  }
  out += "</text>\n</corpus>\n";
  return out;
}

inline GoldKeys parse_gold_keys(std::string_view text, const std::string& origin = "<keys>") {
  GoldKeys gold;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (fields.size() == 1) throw Error(ErrorKind::EmptyKeySet, where + ": '" + line + "'");
    auto [it, inserted] = gold.try_emplace(std::string(fields[0]));
    if (!inserted) throw Error(ErrorKind::MalformedLine, where + ": repeated instance id '" + line + "'");
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i].find('%') == std::string_view::npos)
        throw Error(ErrorKind::MalformedLine, where + ": not a sense key '" + std::string(fields[i]) + "'");
      it->second.emplace(fields[i]);
    }
  }
  return gold;
}

inline GoldKeys load_gold_keys(const std::string& path) { return parse_gold_keys(read_file(path), path); }

/// Key-file layout, sorted by instance id; keys within a line in set order.
inline std::string export_gold_keys(const GoldKeys& gold) {
  std::string out;
  for (const auto& [id, keys] : gold) {
    out += id;
    for (const auto& k : keys) out += " " + k;
    out += '\n';
  }
  return out;
}

struct CorpusStats {
  std::size_t noun = 0;
  std::size_t verb = 0;
  std::size_t adj = 0;
  std::size_t adv = 0;
  std::size_t total = 0;
  std::size_t positive_pairs = 0;
  std::size_t negative_pairs = 0;
  /// Instances left out of the pair counts because some gold key is not
  /// among the lexicon's candidates for (lemma, pos).
  std::size_t unresolvable = 0;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

inline CorpusStats compute_stats(const WsdCorpus& corpus, const GoldKeys& gold, const GlossLexicon& lexicon) {
  CorpusStats stats;
  for (const auto& id : corpus.instance_order()) {
    auto g = gold.find(id);
    if (g == gold.end()) throw Error(ErrorKind::MissingGold, id);
    const CorpusToken& tok = corpus.token(*corpus.locate(id));
    if (!tok.pos) {
      ++stats.unresolvable;
      continue;
    }
    switch (*tok.pos) {
      case PartOfSpeech::Noun: ++stats.noun; break;
      case PartOfSpeech::Verb: ++stats.verb; break;
      case PartOfSpeech::Adjective: ++stats.adj; break;
      case PartOfSpeech::Adverb: ++stats.adv; break;
    }
    ++stats.total;
    const auto candidates = lexicon.candidates(tok.lemma.value_or(tok.surface), *tok.pos);
    std::size_t matched = 0;
    for (const auto& c : candidates) matched += g->second.count(c.sense_key);
    if (candidates.empty() || matched != g->second.size()) {
      ++stats.unresolvable;
      continue;
    }
    stats.positive_pairs += matched;
    stats.negative_pairs += candidates.size() - matched;
  }
  return stats;
}

}  // namespace lmgc

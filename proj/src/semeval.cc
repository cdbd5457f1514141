/*
 * Copyright 2026 The msmatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "msmatch/semeval.h"

#include <map>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "msmatch/error.h"

namespace msm {

namespace {

namespace pt = boost::property_tree;

std::string Attribute(const pt::ptree& node, const char* name) {
  return node.get<std::string>(std::string("<xmlattr>.") + name, "");
}

std::string Text(const pt::ptree& node, const char* child) {
  return node.get<std::string>(child, "");
}

// Walks `tree` depth-first and calls fn on every element named `tag`.
template <typename Fn>
void ForEachElement(const pt::ptree& tree, const std::string& tag, Fn&& fn) {
  for (const auto& [name, child] : tree) {
    if (name == tag) {
      fn(child);
    } else if (name != "<xmlattr>") {
      ForEachElement(child, tag, fn);
    }
  }
}

}  // namespace

Corpus ImportSemevalXml(const std::filesystem::path& path, Split split) {
  pt::ptree tree;
  try {
    pt::read_xml(path.string(), tree);
  } catch (const pt::xml_parser_error& e) {
    throw ImportError("cannot parse " + path.string() + ": " + e.what());
  }

  std::vector<std::string> order;
  std::map<std::string, RawThread> threads;
  ForEachElement(tree, "OrgQuestion", [&](const pt::ptree& org) {
    const std::string id = Attribute(org, "ORGQ_ID");
    if (id.empty()) throw ImportError("OrgQuestion without ORGQ_ID");
    auto [it, inserted] = threads.try_emplace(id);
    RawThread& thread = it->second;
    if (inserted) {
      order.push_back(id);
      thread.thread_id = id;
      thread.split = split;
      thread.question = Text(org, "OrgQSubject") + " " + Text(org, "OrgQBody");
    }
    ForEachElement(org, "RelComment", [&](const pt::ptree& comment) {
      const std::string cid = Attribute(comment, "RELC_ID");
      auto label =
          comment.get_optional<std::string>("<xmlattr>.RELC_RELEVANCE2ORGQ");
      if (!label) {
        throw ImportError("comment " + (cid.empty() ? "<no id>" : cid) +
                          " lacks RELC_RELEVANCE2ORGQ");
      }
      thread.candidates.push_back(
          {cid, Text(comment, "RelCText"), *label == "Good"});
    });
  });

  CorpusBuilder builder;
  for (const std::string& id : order) builder.Add(threads.at(id));
  return std::move(builder).Finish();
}

}  // namespace msm

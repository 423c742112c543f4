#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhetorica/csv.hpp"
#include "rhetorica/effects.hpp"

namespace rhetorica {

// ---- topic correlation graph ---------------------------------------------------

struct TopicNode {
    int id = 0;
    TopicTypeLabels labels;
    int order = -1;  // heat-map ordering by the Destruction-Creation contrast
};

struct TopicEdge {
    int u = 0;
    int v = 0;
    double weight = 0.0;  // signed correlation

    int sign() const { return weight >= 0 ? 1 : -1; }
};

struct TopicGraph {
    std::vector<TopicNode> nodes;
    std::vector<TopicEdge> edges;
    double threshold = 0.0;
    std::string provenance;

    bool has_node(int id) const {
        for (const auto& n : nodes)
            if (n.id == id) return true;
        return false;
    }
};

// ---- narrative (phrasal) graph ----------------------------------------------------

struct NarrativeNode {
    std::string token;
    double weight = 0.0;  // exp posterior sum for the Others faction
    double delta = 0.0;   // Brexiteer minus Remainer probability difference
};

struct NarrativeEdge {
    std::string source;
    std::string target;
    double weight = 0.0;
    double delta = 0.0;
};

struct NarrativeGraph {
    int topic = 0;
    std::vector<NarrativeNode> nodes;
    std::vector<NarrativeEdge> edges;
    std::vector<std::string> warnings;
};

// ---- GraphML/JSON writers -----------------------------------------------------------

namespace graph_detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
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

}  // namespace graph_detail

inline void write_topic_graphml(const TopicGraph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
        << "  <key id=\"verb_type\" for=\"node\" attr.name=\"verb_type\" attr.type=\"string\"/>\n"
        << "  <key id=\"faction_type\" for=\"node\" attr.name=\"faction_type\" attr.type=\"string\"/>\n"
        << "  <key id=\"negation_flag\" for=\"node\" attr.name=\"negation_flag\" attr.type=\"boolean\"/>\n"
        << "  <key id=\"order\" for=\"node\" attr.name=\"order\" attr.type=\"int\"/>\n"
        << "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n"
        << "  <key id=\"sign\" for=\"edge\" attr.name=\"sign\" attr.type=\"int\"/>\n"
        << "  <graph id=\"topics\" edgedefault=\"undirected\">\n";
    for (const auto& n : g.nodes) {
        out << "    <node id=\"t" << n.id << "\">\n"
            << "      <data key=\"verb_type\">" << n.labels.verb_type << "</data>\n"
            << "      <data key=\"faction_type\">" << n.labels.faction_type << "</data>\n"
            << "      <data key=\"negation_flag\">" << (n.labels.negation_flag ? "true" : "false")
            << "</data>\n"
            << "      <data key=\"order\">" << n.order << "</data>\n"
            << "    </node>\n";
    }
    for (const auto& e : g.edges) {
        out << "    <edge source=\"t" << e.u << "\" target=\"t" << e.v << "\">\n"
            << "      <data key=\"weight\">" << csv::fmt(e.weight) << "</data>\n"
            << "      <data key=\"sign\">" << e.sign() << "</data>\n"
            << "    </edge>\n";
    }
    out << "  </graph>\n</graphml>\n";
}

inline nlohmann::json topic_graph_to_json(const TopicGraph& g) {
    nlohmann::json j;
    j["directed"] = false;
    j["threshold"] = g.threshold;
    j["provenance"] = g.provenance;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : g.nodes)
        j["nodes"].push_back({{"id", n.id},
                              {"verb_type", n.labels.verb_type},
                              {"faction_type", n.labels.faction_type},
                              {"negation_flag", n.labels.negation_flag},
                              {"order", n.order}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : g.edges)
        j["edges"].push_back(
            {{"source", e.u}, {"target", e.v}, {"weight", e.weight}, {"sign", e.sign()}});
    return j;
}

inline void write_topic_graph_json(const TopicGraph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << topic_graph_to_json(g).dump(2) << '\n';
}

inline void write_narrative_graphml(const NarrativeGraph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
        << "  <key id=\"weight\" for=\"all\" attr.name=\"weight\" attr.type=\"double\"/>\n"
        << "  <key id=\"delta\" for=\"all\" attr.name=\"delta\" attr.type=\"double\"/>\n"
        << "  <graph id=\"topic" << g.topic << "\" edgedefault=\"directed\">\n";
    for (const auto& n : g.nodes) {
        out << "    <node id=\"" << graph_detail::xml_escape(n.token) << "\">\n"
            << "      <data key=\"weight\">" << csv::fmt(n.weight) << "</data>\n"
            << "      <data key=\"delta\">" << csv::fmt(n.delta) << "</data>\n"
            << "    </node>\n";
    }
    for (const auto& e : g.edges) {
        out << "    <edge source=\"" << graph_detail::xml_escape(e.source) << "\" target=\""
            << graph_detail::xml_escape(e.target) << "\">\n"
            << "      <data key=\"weight\">" << csv::fmt(e.weight) << "</data>\n"
            << "      <data key=\"delta\">" << csv::fmt(e.delta) << "</data>\n"
            << "    </edge>\n";
    }
    out << "  </graph>\n</graphml>\n";
}

inline nlohmann::json narrative_to_json(const NarrativeGraph& g) {
    nlohmann::json j;
    j["directed"] = true;
    j["topic"] = g.topic;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : g.nodes)
        j["nodes"].push_back({{"token", n.token}, {"weight", n.weight}, {"delta", n.delta}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : g.edges)
        j["edges"].push_back({{"source", e.source},
                              {"target", e.target},
                              {"weight", e.weight},
                              {"delta", e.delta}});
    return j;
}

inline void write_narrative_json(const NarrativeGraph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << narrative_to_json(g).dump(2) << '\n';
}

inline NarrativeGraph read_narrative_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    in >> j;
    NarrativeGraph g;
    g.topic = j.at("topic").get<int>();
    for (const auto& n : j.at("nodes"))
        g.nodes.push_back({n.at("token").get<std::string>(), n.at("weight").get<double>(),
                           n.at("delta").get<double>()});
    for (const auto& e : j.at("edges"))
        g.edges.push_back({e.at("source").get<std::string>(), e.at("target").get<std::string>(),
                           e.at("weight").get<double>(), e.at("delta").get<double>()});
    return g;
}

}  // namespace rhetorica

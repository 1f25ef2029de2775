#include "mpda/checkpoint.hpp"

#include <algorithm>
#include <map>

#include "mpda/io.hpp"

namespace mpda {

namespace {

constexpr char kMagic[8] = {'M', 'P', 'D', 'A', 'C', 'K', 'P', 'T'};

struct NamedTensor {
    std::string name;
    const Tensor* tensor;
};

bool ends_with(const std::string& s, const std::string& suffix)
{
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Collects (name, values) pairs for one network in a fixed order. Adam
// moments are stored as tensors shaped like their parameter.
template <typename Net, typename Fn>
void visit_tensors(Net& net, const std::string& prefix, Fn&& fn)
{
    auto& params = net.params();
    auto& moments = net.adam_moments();
    std::size_t k = 0;
    for (auto& p : params) {
        const std::string base = prefix + "." + p.name;
        fn(base + ".weight", p.weights);
        fn(base + ".bias", p.bias);
        if (p.has_running_stats()) {
            fn(base + ".running_mean", p.running_mean);
            fn(base + ".running_var", p.running_var);
        }
        fn(base + ".weight.adam_m", p.weights, &moments[k].m);
        fn(base + ".weight.adam_v", p.weights, &moments[k].v);
        fn(base + ".bias.adam_m", p.bias, &moments[k + 1].m);
        fn(base + ".bias.adam_v", p.bias, &moments[k + 1].v);
        k += 2;
    }
}

const char* const kNetNames[4] = {"encoder", "task1", "task2", "domain"};

}  // namespace

bool is_trainable_entry(const std::string& name)
{
    return ends_with(name, ".weight") || ends_with(name, ".bias");
}

std::string encode_checkpoint(const ModelSet& models, const CheckpointMeta& meta, DomainHead head)
{
    std::vector<ManifestEntry> manifest;
    io::Writer payload;
    const auto nets = models.all();
    for (std::size_t i = 0; i < nets.size(); ++i) {
        visit_tensors(*nets[i], kNetNames[i],
                      [&](const std::string& name, const Tensor& t, const std::vector<float>* moment = nullptr) {
                          manifest.push_back({name, t.shape(), payload.size()});
                          if (moment)
                              payload.floats(moment->data(), moment->size());
                          else
                              payload.floats(t.ptr(), t.numel());
                      });
    }

    io::Writer w;
    w.raw(std::string_view(kMagic, 8));
    w.u32(kCheckpointVersion);
    w.str(meta.phase);
    w.u32(meta.epoch);
    w.u64(meta.seed);
    w.str(meta.config_digest);
    w.u8(head == DomainHead::deep ? 0 : 1);
    for (const auto* n : nets)
        w.u64(n->adam_steps());
    w.u32(static_cast<std::uint32_t>(manifest.size()));
    for (const auto& e : manifest) {
        w.str(e.name);
        w.u32(static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape)
            w.u64(d);
        w.u64(e.offset);
    }
    w.u64(payload.size());
    w.raw(payload.bytes());
    return w.bytes();
}

LoadedCheckpoint decode_checkpoint(std::string_view bytes)
{
    io::Reader r(bytes, "checkpoint");
    LoadedCheckpoint out;
    std::vector<std::uint64_t> steps(4);
    std::uint64_t payload_len = 0;
    try {
        if (r.raw(8) != std::string_view(kMagic, 8))
            throw CheckpointError("checkpoint: bad magic, not a checkpoint file");
        const auto version = r.u32();
        if (version != kCheckpointVersion)
            throw CheckpointVersionError("checkpoint: unsupported format version " + std::to_string(version) +
                                         " (expected " + std::to_string(kCheckpointVersion) + ")");
        out.meta.phase = r.str();
        out.meta.epoch = r.u32();
        out.meta.seed = r.u64();
        out.meta.config_digest = r.str();
        const auto head = r.u8();
        if (head > 1)
            throw CheckpointManifestError("checkpoint: unknown domain head code " + std::to_string(head));
        out.head = head == 0 ? DomainHead::deep : DomainHead::shallow;
        for (auto& s : steps)
            s = r.u64();
        const auto count = r.u32();
        for (std::uint32_t i = 0; i < count; ++i) {
            ManifestEntry e;
            e.name = r.str();
            const auto ndim = r.u32();
            if (ndim == 0 || ndim > 8)
                throw CheckpointManifestError("checkpoint: entry '" + e.name + "' has rank " + std::to_string(ndim));
            for (std::uint32_t d = 0; d < ndim; ++d)
                e.shape.push_back(r.u64());
            e.offset = r.u64();
            out.manifest.push_back(std::move(e));
        }
        payload_len = r.u64();
    } catch (const io::FormatError& e) {
        throw CheckpointTruncatedError(std::string("checkpoint header truncated: ") + e.what());
    }
    if (r.remaining() < payload_len)
        throw CheckpointTruncatedError("checkpoint: payload truncated (" + std::to_string(r.remaining()) + " of " +
                                       std::to_string(payload_len) + " bytes)");
    if (r.remaining() > payload_len)
        throw CheckpointManifestError("checkpoint: " + std::to_string(r.remaining() - payload_len) +
                                      " trailing bytes after payload");
    const std::string_view payload = r.raw(payload_len);

    // Offsets must be in range and blocks must not overlap.
    std::vector<const ManifestEntry*> sorted;
    for (const auto& e : out.manifest)
        sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->offset < b->offset; });
    std::uint64_t end = 0;
    for (const auto* e : sorted) {
        if (e->offset < end)
            throw CheckpointManifestError("checkpoint: entry '" + e->name + "' overlaps its predecessor");
        end = e->offset + e->byte_size();
        if (end > payload_len)
            throw CheckpointManifestError("checkpoint: entry '" + e->name + "' extends past the payload");
    }

    std::map<std::string, const ManifestEntry*> by_name;
    for (const auto& e : out.manifest)
        if (!by_name.emplace(e.name, &e).second)
            throw CheckpointManifestError("checkpoint: duplicate entry '" + e.name + "'");

    out.models = ModelSet::build(out.meta.seed, out.head);
    auto nets = out.models.all();
    std::size_t consumed = 0;
    for (std::size_t i = 0; i < nets.size(); ++i) {
        nets[i]->set_adam_steps(steps[i]);
        visit_tensors(*nets[i], kNetNames[i], [&](const std::string& name, Tensor& t, std::vector<float>* moment = nullptr) {
            auto it = by_name.find(name);
            if (it == by_name.end())
                throw CheckpointManifestError("checkpoint: missing entry '" + name + "'");
            const ManifestEntry& e = *it->second;
            if (e.shape != t.shape())
                throw CheckpointManifestError("checkpoint: entry '" + name + "' has shape " + shape_str(e.shape) +
                                              ", model expects " + shape_str(t.shape()));
            io::Reader block(payload.substr(e.offset, e.byte_size()), name);
            block.floats(moment ? moment->data() : t.ptr(), t.numel());
            ++consumed;
        });
    }
    if (consumed != out.manifest.size())
        throw CheckpointManifestError("checkpoint: " + std::to_string(out.manifest.size() - consumed) +
                                      " unrecognised manifest entries");
    return out;
}

void save_checkpoint(const ModelSet& models, const CheckpointMeta& meta, DomainHead head,
                     const std::filesystem::path& path)
{
    io::write_file(path, encode_checkpoint(models, meta, head));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path)
{
    return decode_checkpoint(io::read_file(path));
}

}  // namespace mpda

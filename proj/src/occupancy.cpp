#include "occsim/occupancy.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "occsim/serialization.hpp"

namespace occsim {

namespace {

constexpr char kMagic[8] = {'O', 'C', 'C', 'G', 'R', 'I', 'D', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kPreamble = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

const char* role_name(Role r) {
  switch (r) {
    case Role::road: return "road";
    case Role::sidewalk: return "sidewalk";
    case Role::vehicle: return "vehicle";
    case Role::ground: return "ground";
    case Role::obstacle: return "obstacle";
    case Role::free: return "free";
    case Role::other: return "other";
  }
  return "other";
}

Role parse_role(const std::string& s) {
  for (Role r : {Role::road, Role::sidewalk, Role::vehicle, Role::ground, Role::obstacle,
                 Role::free, Role::other}) {
    if (s == role_name(r)) return r;
  }
  throw InvalidInput("unknown semantic role '" + s + "'");
}

SemanticTable::SemanticTable(std::vector<SemanticEntry> entries, Label unassigned_id)
    : entries_(std::move(entries)), unassigned_(unassigned_id) {
  lookup_.fill(-1);
  int n_road = 0, n_sidewalk = 0, n_vehicle = 0, n_ground = 0;
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const auto& e = entries_[k];
    if (lookup_[e.id] >= 0) throw InvalidInput("duplicate semantic id " + std::to_string(e.id));
    if (e.id == unassigned_) {
      throw InvalidInput("semantic id " + std::to_string(e.id) + " collides with unassigned id");
    }
    lookup_[e.id] = static_cast<int>(k);
    switch (e.role) {
      case Role::road: ++n_road; road_ = e.id; break;
      case Role::sidewalk: ++n_sidewalk; sidewalk_ = e.id; break;
      case Role::vehicle: ++n_vehicle; vehicle_ = e.id; break;
      case Role::ground: ++n_ground; break;
      default: break;
    }
  }
  if (n_road != 1 || n_sidewalk != 1 || n_vehicle != 1) {
    throw InvalidInput("semantic table needs exactly one road, sidewalk and vehicle id");
  }
  if (n_road + n_sidewalk + n_ground == 0) throw InvalidInput("semantic table has no ground ids");
}

std::optional<Role> SemanticTable::role_of(Label id) const {
  if (lookup_[id] < 0) return std::nullopt;
  return entries_[static_cast<std::size_t>(lookup_[id])].role;
}

bool SemanticTable::is_ground(Label id) const {
  const auto r = role_of(id);
  return r && (*r == Role::road || *r == Role::sidewalk || *r == Role::ground);
}

bool SemanticTable::is_obstacle(Label id) const {
  const auto r = role_of(id);
  return r && *r != Role::road && *r != Role::sidewalk && *r != Role::free;
}

std::vector<Label> SemanticTable::ids() const {
  std::vector<Label> out;
  for (const auto& e : entries_) out.push_back(e.id);
  std::sort(out.begin(), out.end());
  return out;
}

SemanticTable SemanticTable::default_table() {
  return SemanticTable({{0, "free", Role::free},
                        {1, "car", Role::vehicle},
                        {2, "bicycle", Role::other},
                        {3, "motorcycle", Role::other},
                        {4, "pedestrian", Role::other},
                        {5, "traffic_cone", Role::obstacle},
                        {6, "vegetation", Role::obstacle},
                        {7, "road", Role::road},
                        {8, "sidewalk", Role::sidewalk},
                        {9, "terrain", Role::ground},
                        {10, "building", Role::obstacle},
                        {11, "other_ground", Role::ground},
                        {12, "pole", Role::obstacle}},
                       255);
}

SemanticTable SemanticTable::minimal() {
  return SemanticTable({{0, "free", Role::free},
                        {1, "road", Role::road},
                        {2, "sidewalk", Role::sidewalk},
                        {3, "vehicle", Role::vehicle},
                        {4, "terrain", Role::ground},
                        {5, "building", Role::obstacle}},
                       255);
}

Vec2 GridGeometry::cell_center_world(int i, int j) const {
  return origin.apply({(i + 0.5 - nx * 0.5) * voxel_size, (j + 0.5 - ny * 0.5) * voxel_size});
}

Vec2 GridGeometry::world_to_cell(const Vec2& w) const {
  const Vec2 l = origin.apply_inverse(w);
  return {l.x() / voxel_size + nx * 0.5, l.y() / voxel_size + ny * 0.5};
}

std::optional<std::pair<int, int>> GridGeometry::cell_of(const Vec2& w) const {
  const Vec2 u = world_to_cell(w);
  if (!(u.x() >= 0.0 && u.x() < nx && u.y() >= 0.0 && u.y() < ny)) return std::nullopt;
  return std::make_pair(static_cast<int>(std::floor(u.x())), static_cast<int>(std::floor(u.y())));
}

OccupancyGrid::OccupancyGrid(GridDims dims, double voxel_size, Pose2 origin, SemanticTable table)
    : OccupancyGrid(dims, voxel_size, origin, table, table.unassigned()) {}

OccupancyGrid::OccupancyGrid(GridDims dims, double voxel_size, Pose2 origin, SemanticTable table,
                             Label fill)
    : dims_(dims), voxel_size_(voxel_size), origin_(origin), table_(std::move(table)) {
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) throw InvalidInput("grid dims must be positive");
  if (!(voxel_size > 0.0)) throw InvalidInput("voxel_size must be positive");
  labels_.assign(dims.volume(), fill);
}

std::size_t OccupancyGrid::count(Label l) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
}

std::pair<Vec2, Vec2> OccupancyGrid::world_bounds() const {
  const double hx = dims_.x * 0.5 * voxel_size_, hy = dims_.y * 0.5 * voxel_size_;
  Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
  for (const Vec2& c : {Vec2(-hx, -hy), Vec2(hx, -hy), Vec2(-hx, hy), Vec2(hx, hy)}) {
    const Vec2 w = origin_.apply(c);
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }
  return {lo, hi};
}

OccupancyGrid crop(const GlobalMap& map, const Pose2& pose, GridDims out_dims) {
  OccupancyGrid out(out_dims, map.voxel_size(), pose, map.table());
  const int zmax = std::min(out_dims.z, map.dims().z);
  for_each_mapped_column(out.geometry(), map.geometry(), false, [&](int i, int j, int si, int sj) {
    for (int z = 0; z < zmax; ++z) out.at(i, j, z) = map.at(si, sj, z);
  });
  return out;
}

OccupancyGrid overlay(const OccupancyGrid& background, const OccupancyGrid& foreground) {
  if (!(background.dims() == foreground.dims()) ||
      background.voxel_size() != foreground.voxel_size()) {
    throw InvalidInput("overlay: grids differ in dims or voxel size");
  }
  OccupancyGrid out = background;
  const Label none = foreground.table().unassigned();
  auto& dst = out.labels();
  const auto& fg = foreground.labels();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    if (fg[k] != none) dst[k] = fg[k];
  }
  return out;
}

std::vector<std::uint8_t> encode_grid(const OccupancyGrid& grid) {
  nlohmann::json header;
  header["dims"] = {grid.dims().x, grid.dims().y, grid.dims().z};
  header["voxel_size"] = grid.voxel_size();
  header["origin"] = grid.origin();
  header["semantic_table"] = grid.table();
  header["payload_bytes"] = grid.labels().size();
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kPreamble + text.size() + grid.labels().size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), grid.labels().begin(), grid.labels().end());
  return out;
}

OccupancyGrid decode_grid(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kPreamble) {
    throw FormatError("OCCG preamble needs 16 bytes, file has " + std::to_string(bytes.size()),
                      bytes.size());
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw FormatError("bad OCCG magic", 0);
  const std::uint32_t version = get_u32(bytes.data() + 8);
  if (version != kVersion) {
    throw FormatError("unsupported OCCG version " + std::to_string(version), 8);
  }
  const std::uint32_t hlen = get_u32(bytes.data() + 12);
  if (bytes.size() < kPreamble + hlen) {
    throw FormatError("OCCG header truncated: expected " + std::to_string(hlen) + " bytes, found " +
                          std::to_string(bytes.size() - kPreamble),
                      bytes.size());
  }
  nlohmann::json header;
  GridDims dims;
  double voxel_size = 0;
  Pose2 origin;
  SemanticTable table;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPreamble, bytes.begin() + kPreamble + hlen);
    dims = {header.at("dims").at(0).get<int>(), header.at("dims").at(1).get<int>(),
            header.at("dims").at(2).get<int>()};
    voxel_size = header.at("voxel_size").get<double>();
    origin = header.at("origin").get<Pose2>();
    table = header.at("semantic_table").get<SemanticTable>();
  } catch (const std::exception& e) {
    throw FormatError(std::string("invalid OCCG header: ") + e.what(), kPreamble);
  }
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0 || !(voxel_size > 0.0)) {
    throw FormatError("OCCG header has non-positive dims or voxel size", kPreamble);
  }
  const std::size_t expected = dims.volume();
  const std::size_t start = kPreamble + hlen;
  const std::size_t actual = bytes.size() - start;
  if (actual != expected) {
    throw FormatError("OCCG payload length mismatch: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(actual),
                      bytes.size());
  }
  OccupancyGrid grid(dims, voxel_size, origin, table);
  auto& labels = grid.labels();
  for (std::size_t k = 0; k < expected; ++k) {
    const Label l = bytes[start + k];
    if (l != table.unassigned() && !table.contains(l)) {
      throw FormatError("OCCG payload has unknown label " + std::to_string(l), start + k);
    }
    labels[k] = l;
  }
  return grid;
}

void write_grid(const OccupancyGrid& grid, const std::filesystem::path& path) {
  write_bytes(path, encode_grid(grid));
}

OccupancyGrid read_grid(const std::filesystem::path& path) { return decode_grid(read_bytes(path)); }

SemanticTable read_semantic_table(const std::filesystem::path& path) {
  const auto j = read_json(path);
  try {
    return j.get<SemanticTable>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid semantic table: ") + e.what(), 0);
  }
}

}  // namespace occsim

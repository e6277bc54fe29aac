#pragma once

#include "pugan/autodiff.hpp"
#include "pugan/geometry.hpp"
#include "pugan/losses.hpp"
#include "pugan/mesh.hpp"
#include "pugan/metrics.hpp"
#include "pugan/model.hpp"
#include "pugan/training.hpp"
#include "pugan/xyz_io.hpp"
#include "pugan/shapes.hpp"

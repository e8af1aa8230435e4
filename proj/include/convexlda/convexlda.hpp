#pragma once

#include "convexlda/core.hpp"
#include "convexlda/dataset.hpp"
#include "convexlda/error.hpp"
#include "convexlda/fisher.hpp"
#include "convexlda/io.hpp"
#include "convexlda/linalg.hpp"
#include "convexlda/metrics.hpp"
#include "convexlda/model.hpp"
#include "convexlda/pca.hpp"
#include "convexlda/protocol.hpp"
#include "convexlda/version.hpp"

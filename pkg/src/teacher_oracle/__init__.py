from src.teacher_oracle.base_teacher import BaseTeacher
from src.teacher_oracle.lookup_teacher import LookupTableTeacher
from src.teacher_oracle.mlp_teacher import MlpTeacher
from src.teacher_oracle.oracle import BudgetLedger, TeacherOracle
from src.teacher_oracle.teacher_cache import TeacherCache

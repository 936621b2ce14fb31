int hour = timePicker.getCurrentHour()